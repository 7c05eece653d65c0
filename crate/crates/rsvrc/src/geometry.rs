//! Manifold abstraction: points, tangent vectors, and the geometric contract
//! every concrete manifold and every optimizer operation depends on.
//!
//! Points and tangent vectors carry their ambient representation as dense
//! matrices (a vector is a d×1 matrix). Tangent vectors additionally carry
//! their base point, and every cross-point operation validates base
//! agreement: parallel-transport code is prone to silent base mixups.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Membership tolerance for the manifold predicate.
pub const TOL_MANIFOLD: f64 = 1e-10;
/// Tolerance for tangency of a tangent vector at its base point.
pub const TOL_TANGENT: f64 = 1e-10;
/// Tolerance for exp/log round trips.
pub const TOL_ROUNDTRIP: f64 = 1e-8;

/// Ambient-space representation of a manifold point.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub ambient: DMatrix<f64>,
}

impl Point {
    pub fn new(ambient: DMatrix<f64>) -> Self {
        Point { ambient }
    }

    /// Componentwise agreement within `tol` (same shape required).
    pub fn approx_eq(&self, other: &Point, tol: f64) -> bool {
        self.ambient.shape() == other.ambient.shape()
            && (&self.ambient - &other.ambient).amax() <= tol
    }
}

/// Ambient representation of a tangent vector together with its base point.
#[derive(Clone, Debug)]
pub struct TangentVector {
    pub base: Point,
    pub ambient: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: Point, ambient: DMatrix<f64>) -> Self {
        TangentVector { base, ambient }
    }

    pub fn zero_at(base: &Point) -> Self {
        let (r, c) = base.ambient.shape();
        TangentVector {
            base: base.clone(),
            ambient: DMatrix::zeros(r, c),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        TangentVector {
            base: self.base.clone(),
            ambient: &self.ambient * a,
        }
    }

    /// Sum of two tangent vectors at the same base point.
    pub fn add(&self, other: &TangentVector) -> Result<Self> {
        check_same_base(&self.base, &other.base)?;
        Ok(TangentVector {
            base: self.base.clone(),
            ambient: &self.ambient + &other.ambient,
        })
    }

    pub fn sub(&self, other: &TangentVector) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }
}

pub(crate) fn check_same_base(a: &Point, b: &Point) -> Result<()> {
    if !a.approx_eq(b, TOL_MANIFOLD.max(1e-9)) {
        return Err(Error::BasePointMismatch(format!(
            "max componentwise deviation {:.3e}",
            if a.ambient.shape() == b.ambient.shape() {
                (&a.ambient - &b.ambient).amax()
            } else {
                f64::INFINITY
            }
        )));
    }
    Ok(())
}

/// Metric-preserving linear map between two fixed tangent spaces, with its
/// inverse. Instances own whatever factorizations they need so repeated
/// applications inside one inner iteration are cheap.
pub trait TransportMap: Send + Sync {
    /// Γ_x^y applied to the ambient representation of a vector in T_x.
    fn forward(&self, u: &DMatrix<f64>) -> DMatrix<f64>;
    /// The inverse map T_y -> T_x.
    fn backward(&self, u: &DMatrix<f64>) -> DMatrix<f64>;
}

/// Identity transport, used when source and target coincide.
pub struct IdentityTransport;

impl TransportMap for IdentityTransport {
    fn forward(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        u.clone()
    }
    fn backward(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        u.clone()
    }
}

/// The geometric contract of an embedded Riemannian submanifold.
pub trait Manifold: Send + Sync {
    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    /// Shape of the ambient matrix representation (rows, cols).
    fn ambient_shape(&self) -> (usize, usize);

    /// Positive, possibly infinite.
    fn injectivity_radius(&self) -> f64;

    /// Membership predicate within `TOL_MANIFOLD`.
    fn check_point(&self, x: &Point) -> Result<()>;

    /// Tangency predicate within `TOL_TANGENT`, including base membership.
    fn check_tangent(&self, v: &TangentVector) -> Result<()>;

    /// Riemannian metric g_x(u, v). Validates that both vectors are based at x.
    fn inner(&self, x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64>;

    /// Exponential map: the geodesic from x with velocity v, at time 1.
    fn exp(&self, x: &Point, v: &TangentVector) -> Result<Point>;

    /// Inverse exponential map; defined for d(x, y) < injectivity radius.
    fn log(&self, x: &Point, y: &Point) -> Result<TangentVector>;

    /// Parallel transport of u from T_x to T_y along the minimizing geodesic.
    fn transport(&self, x: &Point, y: &Point, u: &TangentVector) -> Result<TangentVector> {
        check_same_base(&u.base, x)?;
        let map = self.transport_pair(x, y)?;
        Ok(TangentVector::new(y.clone(), map.forward(&u.ambient)))
    }

    /// Reusable transport map between T_x and T_y.
    fn transport_pair(&self, x: &Point, y: &Point) -> Result<Box<dyn TransportMap>>;

    /// Euclidean projection of an ambient element onto T_x.
    fn project(&self, x: &Point, w: &DMatrix<f64>) -> TangentVector;

    /// Riemannian distance.
    fn distance(&self, x: &Point, y: &Point) -> Result<f64>;

    /// Lift of a Euclidean gradient to the Riemannian gradient at x.
    fn egrad_to_rgrad(&self, x: &Point, egrad: &DMatrix<f64>) -> TangentVector;

    /// Lift of a Euclidean Hessian application to the Riemannian Hessian:
    /// given ∇F(x), ∇²F(x)[u] and the tangent direction u, returns Hess F(x)[u].
    fn ehess_to_rhess(
        &self,
        x: &Point,
        egrad: &DMatrix<f64>,
        ehess_u: &DMatrix<f64>,
        u: &TangentVector,
    ) -> TangentVector;

    /// Orthonormal basis of T_x under the manifold metric, of length `dim()`.
    fn tangent_basis(&self, x: &Point) -> Vec<TangentVector>;

    /// Norm induced by the metric.
    fn norm(&self, v: &TangentVector) -> f64 {
        self.inner(&v.base, v, v)
            .map(|s| s.max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }

    /// Unit-norm tangent vector with isotropic direction: ambient standard
    /// normal, projected, normalized. Deterministic for a fixed rng state.
    fn random_tangent(&self, x: &Point, rng: &mut dyn rand::RngCore) -> TangentVector {
        let (r, c) = self.ambient_shape();
        loop {
            let w = DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = self.project(x, &w);
            let n = self.norm(&v);
            if n > 1e-12 {
                return v.scaled(1.0 / n);
            }
        }
    }
}

/// Gram–Schmidt fallback for `tangent_basis`: project ambient coordinate
/// directions and orthonormalize under the manifold metric at x.
pub fn gram_schmidt_basis(m: &dyn Manifold, x: &Point) -> Vec<TangentVector> {
    let (r, c) = m.ambient_shape();
    let k = m.dim();
    let mut basis: Vec<TangentVector> = Vec::with_capacity(k);
    'outer: for idx in 0..r * c {
        if basis.len() == k {
            break;
        }
        let mut w = DMatrix::zeros(r, c);
        w[(idx % r, idx / r)] = 1.0;
        let mut v = m.project(x, &w);
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for b in &basis {
                let coeff = m.inner(x, &v, b).expect("basis vectors share base");
                v = TangentVector::new(x.clone(), &v.ambient - coeff * &b.ambient);
            }
        }
        let n = m.norm(&v);
        if n < 1e-8 {
            continue 'outer;
        }
        basis.push(v.scaled(1.0 / n));
    }
    assert_eq!(basis.len(), k, "tangent basis is rank-deficient");
    basis
}
