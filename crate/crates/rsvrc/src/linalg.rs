//! Symmetric-matrix functions via eigendecomposition.
//!
//! All SPD geometry (expm, logm, square roots) goes through one symmetric
//! eigendecomposition per matrix; inputs are symmetrized first to absorb
//! floating-point drift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub struct SymEigen {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Column j is the eigenvector of eigenvalues[j].
    pub eigenvectors: DMatrix<f64>,
}

/// Cyclic Jacobi eigendecomposition. nalgebra's `SymmetricEigen` only
/// reconstructs to ~1e-8 on dense matrices, which is not enough for the
/// geometry round-trip and subsolver certification tolerances; Jacobi
/// converges to machine precision for the small matrices used here.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    let mut a = sym(m);
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1e-300);
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues = DVector::from_fn(n, |i, _| a[(order[i], order[i])]);
    let eigenvectors = DMatrix::from_fn(n, n, |r, j| v[(r, order[j])]);
    SymEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// Q f(Λ) Qᵀ for symmetric input.
pub fn sym_matrix_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let q = &eig.eigenvectors;
    let mut d = DMatrix::zeros(m.nrows(), m.nrows());
    for i in 0..m.nrows() {
        d[(i, i)] = f(eig.eigenvalues[i]);
    }
    q * d * q.transpose()
}

pub fn expm_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_matrix_fn(m, f64::exp)
}

/// Relative positive-definiteness check. The threshold sits just above the
/// eigensolver's noise floor (~1e-15·λ_max) so that severely ill-conditioned
/// but genuinely SPD iterates — which the complete affine-invariant geometry
/// can legitimately visit — are not rejected.
pub fn check_pd(m: &DMatrix<f64>) -> Result<()> {
    let eig = sym_eigen(m);
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !(lmin > 1e-14 * lmax.max(0.0)) || lmax <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "lambda_min = {lmin:.3e}, lambda_max = {lmax:.3e}"
        )));
    }
    Ok(())
}

fn pd_matrix_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64, what: &str) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m);
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let q = &eig.eigenvectors;
    let mut d = DMatrix::zeros(m.nrows(), m.nrows());
    for i in 0..m.nrows() {
        let l = eig.eigenvalues[i];
        if !(l > 1e-14 * lmax.max(0.0)) {
            return Err(Error::NotPositiveDefinite(format!(
                "{what}: eigenvalue {l:.3e} (lambda_max = {lmax:.3e})"
            )));
        }
        d[(i, i)] = f(l);
    }
    Ok(q * d * q.transpose())
}

pub fn logm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pd_matrix_fn(m, f64::ln, "logm")
}

pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pd_matrix_fn(m, f64::sqrt, "sqrtm")
}

pub fn invsqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pd_matrix_fn(m, |l| 1.0 / l.sqrt(), "invsqrtm")
}

pub fn inv_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pd_matrix_fn(m, |l| 1.0 / l, "inv")
}

/// log det of an SPD matrix.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let eig = sym_eigen(m);
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let mut acc = 0.0;
    for &l in eig.eigenvalues.iter() {
        if !(l > 1e-14 * lmax.max(0.0)) {
            return Err(Error::NotPositiveDefinite(format!(
                "logdet: eigenvalue {l:.3e}"
            )));
        }
        acc += l.ln();
    }
    Ok(acc)
}
