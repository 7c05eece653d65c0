//! Finite-difference validation of gradients/Hessians along geodesics, dense
//! tangent-basis Hessians, and approximate second-order stationarity
//! certificates. Nothing here touches the SO-call counter.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point, TangentVector};
use crate::objectives::{riem_grad_full, riem_hess_op_full, FiniteSumObjective, HessianOperator, SoCounter};

/// Maximum relative error between ⟨grad F(x), v⟩ and the centered difference
/// of t ↦ F(Exp_x(t v)) over `n_probes` random unit tangent directions.
pub fn fd_gradient_check(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    n_probes: usize,
    step: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if n_probes == 0 || !(1e-7..=1e-3).contains(&step) {
        return Err(Error::InvalidConfig(
            "fd_gradient_check needs n_probes >= 1 and step in [1e-7, 1e-3]".into(),
        ));
    }
    let scratch = SoCounter::new();
    let grad = riem_grad_full(obj, m, x, &scratch)?;
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let v = m.random_tangent(x, rng);
        let analytic = m.inner(x, &grad, &v)?;
        let fd = geodesic_diff1(obj, m, x, &v, step)?;
        worst = worst.max(rel_err(analytic, fd));
    }
    Ok(worst)
}

/// Maximum relative error between ⟨Hess F(x)[v], v⟩ and the second centered
/// difference of t ↦ F(Exp_x(t v)).
pub fn fd_hessian_check(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    n_probes: usize,
    step: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if n_probes == 0 || !(1e-7..=1e-3).contains(&step) {
        return Err(Error::InvalidConfig(
            "fd_hessian_check needs n_probes >= 1 and step in [1e-7, 1e-3]".into(),
        ));
    }
    let scratch = SoCounter::new();
    let op = riem_hess_op_full(obj, m, x, &scratch)?;
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let v = m.random_tangent(x, rng);
        let analytic = m.inner(x, &op.apply(&v)?, &v)?;
        let f0 = obj.value(x)?;
        let fp = obj.value(&m.exp(x, &v.scaled(step))?)?;
        let fm = obj.value(&m.exp(x, &v.scaled(-step))?)?;
        let fd = (fp - 2.0 * f0 + fm) / (step * step);
        worst = worst.max(rel_err(analytic, fd));
    }
    Ok(worst)
}

fn geodesic_diff1(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    v: &TangentVector,
    step: f64,
) -> Result<f64> {
    let fp = obj.value(&m.exp(x, &v.scaled(step))?)?;
    let fm = obj.value(&m.exp(x, &v.scaled(-step))?)?;
    Ok((fp - fm) / (2.0 * step))
}

fn rel_err(reference: f64, approx: f64) -> f64 {
    (reference - approx).abs() / (1.0 + reference.abs())
}

/// Dense Hessian and its spectrum.
pub struct DenseHessian {
    /// k×k symmetric matrix of the operator in the supplied orthonormal basis.
    pub matrix: DMatrix<f64>,
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
}

/// Materialize a Hessian operator in an orthonormal tangent basis,
/// symmetrizing to suppress round-off asymmetry.
pub fn dense_hessian(
    m: &dyn Manifold,
    x: &Point,
    op: &dyn HessianOperator,
    basis: &[TangentVector],
) -> Result<DenseHessian> {
    let matrix = dense_hessian_matrix(m, x, op, basis)?;
    let eig = crate::linalg::sym_eigen(&matrix);
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(DenseHessian { matrix, eigenvalues })
}

pub(crate) fn dense_hessian_matrix(
    m: &dyn Manifold,
    x: &Point,
    op: &dyn HessianOperator,
    basis: &[TangentVector],
) -> Result<DMatrix<f64>> {
    let k = basis.len();
    if k != m.dim() {
        return Err(Error::ContractViolation(format!(
            "tangent basis has {k} vectors, expected {}",
            m.dim()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let col = op.apply(&basis[j])?;
        for i in 0..k {
            a[(i, j)] = m.inner(x, &basis[i], &col)?;
        }
    }
    Ok((&a + a.transpose()) * 0.5)
}

/// Approximate second-order stationarity certificate at tolerance ε.
#[derive(Clone, Debug)]
pub struct StationarityReport {
    pub grad_norm: f64,
    pub lambda_min: f64,
    /// Smallest ε' at which the point certifies (with the given L_H).
    pub epsilon_equivalent: f64,
    pub passed: bool,
}

/// Checks ‖grad F(x)‖ ≤ ε and λ_min(Hess F(x)) ≥ −√(L_H ε), inclusively.
pub fn certify(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    epsilon: f64,
    l_h: f64,
    rng: &mut dyn RngCore,
) -> Result<StationarityReport> {
    if epsilon <= 0.0 || l_h <= 0.0 {
        return Err(Error::InvalidConfig(
            "certify needs epsilon > 0 and l_h > 0".into(),
        ));
    }
    let scratch = SoCounter::new();
    let grad = riem_grad_full(obj, m, x, &scratch)?;
    let op = riem_hess_op_full(obj, m, x, &scratch)?;
    let grad_norm = m.norm(&grad);
    let lambda_min = crate::optimizer::lambda_min_of_op(m, x, &op, rng)?;
    let curv_eps = if lambda_min < 0.0 {
        lambda_min * lambda_min / l_h
    } else {
        0.0
    };
    let epsilon_equivalent = grad_norm.max(curv_eps);
    let passed = grad_norm <= epsilon && lambda_min >= -(l_h * epsilon).sqrt();
    Ok(StationarityReport {
        grad_norm,
        lambda_min,
        epsilon_equivalent,
        passed,
    })
}
