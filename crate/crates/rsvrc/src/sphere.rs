//! Unit sphere S^{d-1} = { x ∈ R^d : xᵀx = 1 } with closed-form geometry.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{
    check_same_base, IdentityTransport, Manifold, Point, TangentVector, TransportMap,
    TOL_MANIFOLD, TOL_TANGENT,
};

/// Threshold on π − θ below which log/transport are treated as antipodal.
const ANTIPODAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SphereManifold {
    /// Ambient dimension d ≥ 2.
    pub d: usize,
}

impl SphereManifold {
    pub fn new(d: usize) -> Self {
        assert!(d >= 2, "sphere needs ambient dimension >= 2");
        SphereManifold { d }
    }

    /// Geodesic angle between two points, with the dot product clamped:
    /// floating-point dot products exceed [-1, 1] by ~1e-16.
    fn angle(&self, x: &Point, y: &Point) -> f64 {
        x.ambient.dot(&y.ambient).clamp(-1.0, 1.0).acos()
    }

    fn check_not_antipodal(&self, theta: f64) -> Result<()> {
        if std::f64::consts::PI - theta < ANTIPODAL_TOL {
            return Err(Error::OutsideInjectivityRadius(format!(
                "sphere log undefined near the cut locus (theta = {theta:.12})"
            )));
        }
        Ok(())
    }
}

struct SphereTransport {
    /// log_x(y) in ambient coordinates.
    lx: DMatrix<f64>,
    /// log_y(x) in ambient coordinates.
    ly: DMatrix<f64>,
    dist2: f64,
}

impl TransportMap for SphereTransport {
    fn forward(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let c = self.lx.dot(u) / self.dist2;
        u - c * (&self.lx + &self.ly)
    }
    fn backward(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let c = self.ly.dot(u) / self.dist2;
        u - c * (&self.ly + &self.lx)
    }
}

impl Manifold for SphereManifold {
    fn dim(&self) -> usize {
        self.d - 1
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.d, 1)
    }

    fn injectivity_radius(&self) -> f64 {
        std::f64::consts::PI
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.ambient.shape() != (self.d, 1) {
            return Err(Error::NotOnManifold(format!(
                "expected {}x1 vector, got {:?}",
                self.d,
                x.ambient.shape()
            )));
        }
        let r = x.ambient.norm_squared() - 1.0;
        if r.abs() > TOL_MANIFOLD {
            return Err(Error::NotOnManifold(format!("|‖x‖²−1| = {:.3e}", r.abs())));
        }
        Ok(())
    }

    fn check_tangent(&self, v: &TangentVector) -> Result<()> {
        self.check_point(&v.base)?;
        let t = v.base.ambient.dot(&v.ambient);
        if t.abs() > TOL_TANGENT * (1.0 + v.ambient.norm()) {
            return Err(Error::ContractViolation(format!(
                "vector not tangent: |xᵀv| = {:.3e}",
                t.abs()
            )));
        }
        Ok(())
    }

    fn inner(&self, x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        check_same_base(&u.base, x)?;
        check_same_base(&v.base, x)?;
        Ok(u.ambient.dot(&v.ambient))
    }

    fn exp(&self, x: &Point, v: &TangentVector) -> Result<Point> {
        check_same_base(&v.base, x)?;
        let n = v.ambient.norm();
        if n == 0.0 {
            return Ok(x.clone());
        }
        let y = n.cos() * &x.ambient + (n.sin() / n) * &v.ambient;
        // renormalize to suppress drift over long runs
        let y = &y / y.norm();
        Ok(Point::new(y))
    }

    fn log(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let theta = self.angle(x, y);
        if theta == 0.0 {
            return Ok(TangentVector::zero_at(x));
        }
        self.check_not_antipodal(theta)?;
        let c = x.ambient.dot(&y.ambient);
        let w = &y.ambient - c * &x.ambient;
        let wn = w.norm();
        if wn < 1e-300 {
            return Ok(TangentVector::zero_at(x));
        }
        Ok(TangentVector::new(x.clone(), (theta / wn) * w))
    }

    fn transport_pair(&self, x: &Point, y: &Point) -> Result<Box<dyn TransportMap>> {
        let theta = self.angle(x, y);
        if theta < 1e-14 {
            return Ok(Box::new(IdentityTransport));
        }
        self.check_not_antipodal(theta)?;
        let lx = self.log(x, y)?.ambient;
        let ly = self.log(y, x)?.ambient;
        Ok(Box::new(SphereTransport {
            lx,
            ly,
            dist2: theta * theta,
        }))
    }

    fn project(&self, x: &Point, w: &DMatrix<f64>) -> TangentVector {
        let c = x.ambient.dot(w);
        TangentVector::new(x.clone(), w - c * &x.ambient)
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(self.angle(x, y))
    }

    fn egrad_to_rgrad(&self, x: &Point, egrad: &DMatrix<f64>) -> TangentVector {
        self.project(x, egrad)
    }

    fn ehess_to_rhess(
        &self,
        x: &Point,
        egrad: &DMatrix<f64>,
        ehess_u: &DMatrix<f64>,
        u: &TangentVector,
    ) -> TangentVector {
        let proj = self.project(x, ehess_u);
        let c = x.ambient.dot(egrad);
        TangentVector::new(x.clone(), proj.ambient - c * &u.ambient)
    }

    fn tangent_basis(&self, x: &Point) -> Vec<TangentVector> {
        // Columns 2..d of the Householder reflector mapping e1 to -sign(x1)·x
        // form an orthonormal basis of the complement of x.
        let d = self.d;
        let sign = if x.ambient[(0, 0)] >= 0.0 { 1.0 } else { -1.0 };
        let mut w = x.ambient.clone();
        w[(0, 0)] += sign;
        let w2 = w.norm_squared();
        (1..d)
            .map(|j| {
                let mut e = DMatrix::zeros(d, 1);
                e[(j, 0)] = 1.0;
                let v = &e - (2.0 * w[(j, 0)] / w2) * &w;
                TangentVector::new(x.clone(), v)
            })
            .collect()
    }
}
