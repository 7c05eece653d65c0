//! Finite-sum objectives F(x) = (1/N) Σ f_i(x) with per-component Euclidean
//! value/gradient/Hessian (the second-order oracle) and their lifts to the
//! Riemannian gradient and Hessian-vector products.
//!
//! One SO call covers value + gradient + Hessian-applier for a single
//! (index, point) pair; fetching gradient and Hessian of the same component
//! at the same point does not double-count.

mod sphere_classifier;
mod student_t;

pub use sphere_classifier::SphereClassifierObjective;
pub use student_t::StudentTObjective;

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point, TangentVector};

/// Monotone counter of second-order-oracle invocations.
#[derive(Debug, Default)]
pub struct SoCounter {
    calls: AtomicU64,
}

impl SoCounter {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn add(&self, n: u64) {
        self.calls.fetch_add(n, Ordering::Relaxed);
    }
    pub fn get(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Linear map u ↦ ∇²F_B(x)[u] in ambient coordinates, for a fixed batch B
/// and point x. Implementations may cache dense forms.
pub trait EuclidHessOp: Send + Sync {
    fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64>;
}

/// A finite-sum objective with component indices 0..N.
pub trait FiniteSumObjective: Send + Sync {
    fn n_components(&self) -> usize;

    fn ambient_shape(&self) -> (usize, usize);

    fn component_value(&self, i: usize, x: &Point) -> Result<f64>;

    fn component_egrad(&self, i: usize, x: &Point) -> Result<DMatrix<f64>>;

    fn component_ehess_apply(&self, i: usize, x: &Point, u: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// Mean value over a batch of indices. Overridden with vectorized paths.
    fn batch_value(&self, batch: &[usize], x: &Point) -> Result<f64> {
        check_batch(batch, self.n_components())?;
        let mut acc = 0.0;
        for &i in batch {
            acc += self.component_value(i, x)?;
        }
        Ok(acc / batch.len() as f64)
    }

    /// Mean Euclidean gradient over a batch.
    fn batch_egrad(&self, batch: &[usize], x: &Point) -> Result<DMatrix<f64>> {
        check_batch(batch, self.n_components())?;
        let (r, c) = self.ambient_shape();
        let mut acc = DMatrix::zeros(r, c);
        for &i in batch {
            acc += self.component_egrad(i, x)?;
        }
        Ok(acc / batch.len() as f64)
    }

    /// Mean Euclidean Hessian operator over a batch.
    fn batch_ehess_op(&self, batch: &[usize], x: &Point) -> Result<Box<dyn EuclidHessOp>>;

    /// Euclidean Hessian operator of the full sum, free to use heavier
    /// caching than the batched path (built once per epoch anchor).
    fn full_ehess_op(&self, x: &Point) -> Result<Box<dyn EuclidHessOp>> {
        let all: Vec<usize> = (0..self.n_components()).collect();
        self.batch_ehess_op(&all, x)
    }

    /// F(x), not oracle-counted (diagnostics call this directly).
    fn value(&self, x: &Point) -> Result<f64> {
        let all: Vec<usize> = (0..self.n_components()).collect();
        self.batch_value(&all, x)
    }
}

pub(crate) fn check_batch(batch: &[usize], n: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for &i in batch {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
    }
    Ok(())
}

/// Self-adjoint linear map on a tangent space.
pub trait HessianOperator: Send + Sync {
    fn base_point(&self) -> &Point;
    fn apply(&self, u: &TangentVector) -> Result<TangentVector>;
}

/// Riemannian Hessian of a (batch mean of a) finite-sum objective, built
/// from the batch Euclidean gradient and Hessian operator.
pub struct RiemannianHessOp<'a> {
    manifold: &'a dyn Manifold,
    x: Point,
    egrad: DMatrix<f64>,
    eop: Box<dyn EuclidHessOp>,
}

impl HessianOperator for RiemannianHessOp<'_> {
    fn base_point(&self) -> &Point {
        &self.x
    }

    fn apply(&self, u: &TangentVector) -> Result<TangentVector> {
        crate::geometry::check_same_base(&u.base, &self.x)?;
        let ehess_u = self.eop.apply(&u.ambient);
        Ok(self
            .manifold
            .ehess_to_rhess(&self.x, &self.egrad, &ehess_u, u))
    }
}

/// One SO call: the triple [f_i(x), ∇f_i(x), u ↦ ∇²f_i(x)[u]].
pub fn euclid_oracle<'a>(
    obj: &'a dyn FiniteSumObjective,
    i: usize,
    x: &Point,
    counter: &SoCounter,
) -> Result<(f64, DMatrix<f64>, impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>> + 'a)> {
    if i >= obj.n_components() {
        return Err(Error::IndexOutOfRange {
            index: i,
            n: obj.n_components(),
        });
    }
    counter.add(1);
    let value = obj.component_value(i, x)?;
    let egrad = obj.component_egrad(i, x)?;
    let xc = x.clone();
    let apply = move |u: &DMatrix<f64>| obj.component_ehess_apply(i, &xc, u);
    Ok((value, egrad, apply))
}

/// Mean Riemannian gradient over a batch; consumes |batch| SO calls.
pub fn riem_grad_batch(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    batch: &[usize],
    counter: &SoCounter,
) -> Result<TangentVector> {
    let egrad = obj.batch_egrad(batch, x)?;
    counter.add(batch.len() as u64);
    Ok(m.egrad_to_rgrad(x, &egrad))
}

/// grad F(x); consumes N SO calls.
pub fn riem_grad_full(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    counter: &SoCounter,
) -> Result<TangentVector> {
    let all: Vec<usize> = (0..obj.n_components()).collect();
    riem_grad_batch(obj, m, x, &all, counter)
}

/// Riemannian Hessian operator of the batch mean; consumes |batch| SO calls
/// (component Hessians are evaluated once; applications are free).
pub fn riem_hess_op_batch<'a>(
    obj: &dyn FiniteSumObjective,
    m: &'a dyn Manifold,
    x: &Point,
    batch: &[usize],
    counter: &SoCounter,
) -> Result<RiemannianHessOp<'a>> {
    let egrad = obj.batch_egrad(batch, x)?;
    let eop = obj.batch_ehess_op(batch, x)?;
    counter.add(batch.len() as u64);
    Ok(RiemannianHessOp {
        manifold: m,
        x: x.clone(),
        egrad,
        eop,
    })
}

/// Hess F(x)[·]; consumes N SO calls.
pub fn riem_hess_op_full<'a>(
    obj: &dyn FiniteSumObjective,
    m: &'a dyn Manifold,
    x: &Point,
    counter: &SoCounter,
) -> Result<RiemannianHessOp<'a>> {
    let egrad = obj.batch_egrad(&(0..obj.n_components()).collect::<Vec<_>>(), x)?;
    let eop = obj.full_ehess_op(x)?;
    counter.add(obj.n_components() as u64);
    Ok(RiemannianHessOp {
        manifold: m,
        x: x.clone(),
        egrad,
        eop,
    })
}

/// Full value, gradient and Hessian at one point for N SO calls total:
/// value, gradient, and Hessian of a component at one point are one call.
pub fn full_so_eval<'a>(
    obj: &dyn FiniteSumObjective,
    m: &'a dyn Manifold,
    x: &Point,
    counter: &SoCounter,
) -> Result<(f64, TangentVector, RiemannianHessOp<'a>)> {
    let all: Vec<usize> = (0..obj.n_components()).collect();
    let value = obj.batch_value(&all, x)?;
    let egrad = obj.batch_egrad(&all, x)?;
    let eop = obj.full_ehess_op(x)?;
    counter.add(obj.n_components() as u64);
    Ok((
        value,
        m.egrad_to_rgrad(x, &egrad),
        RiemannianHessOp {
            manifold: m,
            x: x.clone(),
            egrad,
            eop,
        },
    ))
}

/// Riemannian Hessian-vector product of the batch mean applied to one
/// direction, without keeping the operator around.
pub fn riem_hess_vec_batch(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    u: &TangentVector,
    batch: &[usize],
    counter: &SoCounter,
) -> Result<TangentVector> {
    let op = riem_hess_op_batch(obj, m, x, batch, counter)?;
    op.apply(u)
}

pub fn riem_hess_vec_full(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    u: &TangentVector,
    counter: &SoCounter,
) -> Result<TangentVector> {
    let all: Vec<usize> = (0..obj.n_components()).collect();
    riem_hess_vec_batch(obj, m, x, u, &all, counter)
}
