//! Maximum-likelihood estimation of the inverse scale matrix of a zero-mean
//! multivariate Student-t distribution over the SPD manifold:
//!
//!   F(X) = (ν+p)/(2N) Σ log(1 + aᵢᵀXaᵢ/ν) − ½ log det X,  X ∈ S^p_{++}
//!
//! with components f_i(X) = (ν+p)/2 · log(1 + aᵢᵀXaᵢ/ν) − ½ log det X, so
//! F = (1/N) Σ f_i. Euclidean derivatives:
//!
//!   ∇f_i(X)     = (ν+p)/2 · aᵢaᵢᵀ/(ν + aᵢᵀXaᵢ) − ½ X⁻¹
//!   ∇²f_i(X)[U] = −(ν+p)/2 · (aᵢᵀUaᵢ)/(ν + aᵢᵀXaᵢ)² · aᵢaᵢᵀ + ½ X⁻¹UX⁻¹

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{inv_spd, logdet_spd};

use super::{EuclidHessOp, FiniteSumObjective};

pub struct StudentTObjective {
    /// N×p data matrix, rows a_i.
    samples: DMatrix<f64>,
    /// Degrees of freedom.
    nu: f64,
    p: usize,
}

impl StudentTObjective {
    pub fn new(samples: DMatrix<f64>, nu: f64) -> Self {
        assert!(nu > 0.0);
        let p = samples.ncols();
        StudentTObjective { samples, nu, p }
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn row(&self, i: usize) -> DVector<f64> {
        self.samples.row(i).transpose()
    }

    /// aᵀXa for one sample.
    fn quad(&self, i: usize, x: &DMatrix<f64>) -> f64 {
        let a = self.samples.row(i);
        (a * x * a.transpose())[(0, 0)]
    }

    fn check_x(&self, x: &Point) -> Result<DMatrix<f64>> {
        inv_spd(&x.ambient)
            .map_err(|e| Error::NotPositiveDefinite(format!("Student-t oracle: {e}")))
    }
}

impl FiniteSumObjective for StudentTObjective {
    fn n_components(&self) -> usize {
        self.samples.nrows()
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.p, self.p)
    }

    fn component_value(&self, i: usize, x: &Point) -> Result<f64> {
        let ld = logdet_spd(&x.ambient)?;
        let q = self.quad(i, &x.ambient);
        Ok((self.nu + self.p as f64) / 2.0 * (1.0 + q / self.nu).ln() - 0.5 * ld)
    }

    fn component_egrad(&self, i: usize, x: &Point) -> Result<DMatrix<f64>> {
        let xi = self.check_x(x)?;
        let a = self.row(i);
        let q = self.quad(i, &x.ambient);
        let coeff = (self.nu + self.p as f64) / (2.0 * (self.nu + q));
        Ok(coeff * &a * a.transpose() - 0.5 * xi)
    }

    fn component_ehess_apply(&self, i: usize, x: &Point, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let xi = self.check_x(x)?;
        let a = self.row(i);
        let q = self.quad(i, &x.ambient);
        let aua = (a.transpose() * u * &a)[(0, 0)];
        let coeff = -(self.nu + self.p as f64) / 2.0 * aua / ((self.nu + q) * (self.nu + q));
        Ok(coeff * &a * a.transpose() + 0.5 * &xi * u * &xi)
    }

    fn batch_value(&self, batch: &[usize], x: &Point) -> Result<f64> {
        super::check_batch(batch, self.n_components())?;
        let ld = logdet_spd(&x.ambient)?;
        let scale = (self.nu + self.p as f64) / 2.0;
        let mut acc = 0.0;
        for &i in batch {
            acc += scale * (1.0 + self.quad(i, &x.ambient) / self.nu).ln();
        }
        Ok(acc / batch.len() as f64 - 0.5 * ld)
    }

    fn batch_egrad(&self, batch: &[usize], x: &Point) -> Result<DMatrix<f64>> {
        super::check_batch(batch, self.n_components())?;
        let xi = self.check_x(x)?;
        let b = batch.len();
        // (ν+p)/(2b) Σ aᵢaᵢᵀ/(ν+qᵢ) as Aᵀ D A over the batch rows
        let mut scaled = DMatrix::zeros(b, self.p);
        for (k, &i) in batch.iter().enumerate() {
            let q = self.quad(i, &x.ambient);
            let w = (self.nu + self.p as f64) / (2.0 * b as f64 * (self.nu + q));
            for j in 0..self.p {
                scaled[(k, j)] = w * self.samples[(i, j)];
            }
        }
        let mut rows = DMatrix::zeros(b, self.p);
        for (k, &i) in batch.iter().enumerate() {
            rows.row_mut(k).copy_from(&self.samples.row(i));
        }
        Ok(rows.transpose() * scaled - 0.5 * xi)
    }

    fn batch_ehess_op(&self, batch: &[usize], x: &Point) -> Result<Box<dyn EuclidHessOp>> {
        super::check_batch(batch, self.n_components())?;
        let xi = self.check_x(x)?;
        let b = batch.len();
        let mut rows = DMatrix::zeros(b, self.p);
        let mut weights = DVector::zeros(b);
        for (k, &i) in batch.iter().enumerate() {
            rows.row_mut(k).copy_from(&self.samples.row(i));
            let q = self.quad(i, &x.ambient);
            weights[k] =
                (self.nu + self.p as f64) / (2.0 * b as f64) / ((self.nu + q) * (self.nu + q));
        }
        Ok(Box::new(StudentTBatchHess { rows, weights, xi }))
    }

    fn full_ehess_op(&self, x: &Point) -> Result<Box<dyn EuclidHessOp>> {
        // Epoch-anchor form: the rank-one part is cached as a dense p²×p²
        // tensor −(ν+p)/(2N) Σ vec(aᵢaᵢᵀ)vec(aᵢaᵢᵀ)ᵀ/(ν+qᵢ)², built with one
        // gemm; subsequent applications are O(p⁴).
        let xi = self.check_x(x)?;
        let n = self.n_components();
        let p = self.p;
        let scale = (self.nu + p as f64) / (2.0 * n as f64);
        let mut b = DMatrix::zeros(n, p * p);
        for i in 0..n {
            let q = self.quad(i, &x.ambient);
            let w = scale.sqrt() / (self.nu + q);
            let a = self.samples.row(i);
            // vec(a aᵀ) in column-major order
            for c in 0..p {
                for r in 0..p {
                    b[(i, c * p + r)] = w * a[r] * a[c];
                }
            }
        }
        let tensor = -(b.transpose() * b);
        Ok(Box::new(StudentTFullHess { tensor, xi, p }))
    }
}

struct StudentTBatchHess {
    rows: DMatrix<f64>,
    weights: DVector<f64>,
    xi: DMatrix<f64>,
}

impl EuclidHessOp for StudentTBatchHess {
    fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        // −Σ wᵢ (aᵢᵀUaᵢ) aᵢaᵢᵀ + ½ X⁻¹UX⁻¹
        let au = &self.rows * u; // b×p, row i = aᵢᵀU
        let b = self.rows.nrows();
        let mut coeff = DVector::zeros(b);
        for i in 0..b {
            coeff[i] = -self.weights[i] * au.row(i).dot(&self.rows.row(i));
        }
        let mut scaled = self.rows.clone();
        for i in 0..b {
            scaled.row_mut(i).scale_mut(coeff[i]);
        }
        self.rows.transpose() * scaled + 0.5 * &self.xi * u * &self.xi
    }
}

struct StudentTFullHess {
    tensor: DMatrix<f64>,
    xi: DMatrix<f64>,
    p: usize,
}

impl EuclidHessOp for StudentTFullHess {
    fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.p;
        let vec_u = DVector::from_column_slice(u.as_slice());
        let tv = &self.tensor * vec_u;
        let rank_one = DMatrix::from_column_slice(p, p, tv.as_slice());
        rank_one + 0.5 * &self.xi * u * &self.xi
    }
}
