//! Linear classifier on the unit sphere with the smooth nonconvex loss
//!
//!   ℓ_i(x) = (1 − 1/(1 + e^{−b_i xᵀa_i}))²,   F(x) = (1/N) Σ ℓ_i(x).
//!
//! With s = b_i xᵀa_i and g = 1/(1 + e^s) the derivatives in s are
//!   ℓ   = g²
//!   ℓ'  = −2 g² (1 − g)
//!   ℓ'' = 2 g² (1 − g)(2 − 3g)
//! so ∇ℓ_i = ℓ'(s) b_i a_i and ∇²ℓ_i = ℓ''(s) a_i a_iᵀ.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::Point;

use super::{EuclidHessOp, FiniteSumObjective};

pub struct SphereClassifierObjective {
    /// N×d feature matrix, rows a_i.
    features: DMatrix<f64>,
    /// Labels in {−1, +1}.
    labels: Vec<f64>,
    d: usize,
}

impl SphereClassifierObjective {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>) -> Self {
        assert_eq!(features.nrows(), labels.len());
        assert!(labels.iter().all(|&b| b == 1.0 || b == -1.0));
        let d = features.ncols();
        SphereClassifierObjective {
            features,
            labels,
            d,
        }
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// g = 1/(1+e^s) without overflow for large |s|.
    fn sigmoid_complement(s: f64) -> f64 {
        if s >= 0.0 {
            let e = (-s).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + s.exp())
        }
    }

    fn margin(&self, i: usize, x: &Point) -> f64 {
        self.labels[i] * self.features.row(i).dot(&x.ambient.column(0).transpose())
    }

    fn loss_d1(s: f64) -> f64 {
        let g = Self::sigmoid_complement(s);
        -2.0 * g * g * (1.0 - g)
    }

    fn loss_d2(s: f64) -> f64 {
        let g = Self::sigmoid_complement(s);
        2.0 * g * g * (1.0 - g) * (2.0 - 3.0 * g)
    }
}

impl FiniteSumObjective for SphereClassifierObjective {
    fn n_components(&self) -> usize {
        self.labels.len()
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.d, 1)
    }

    fn component_value(&self, i: usize, x: &Point) -> Result<f64> {
        let g = Self::sigmoid_complement(self.margin(i, x));
        Ok(g * g)
    }

    fn component_egrad(&self, i: usize, x: &Point) -> Result<DMatrix<f64>> {
        let c = Self::loss_d1(self.margin(i, x)) * self.labels[i];
        Ok(DMatrix::from_column_slice(self.d, 1, (c * self.features.row(i).transpose()).as_slice()))
    }

    fn component_ehess_apply(&self, i: usize, x: &Point, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let a = self.features.row(i).transpose();
        let c = Self::loss_d2(self.margin(i, x)) * a.dot(&u.column(0));
        Ok(DMatrix::from_column_slice(self.d, 1, (c * a).as_slice()))
    }

    fn batch_value(&self, batch: &[usize], x: &Point) -> Result<f64> {
        super::check_batch(batch, self.n_components())?;
        let mut acc = 0.0;
        for &i in batch {
            let g = Self::sigmoid_complement(self.margin(i, x));
            acc += g * g;
        }
        Ok(acc / batch.len() as f64)
    }

    fn batch_egrad(&self, batch: &[usize], x: &Point) -> Result<DMatrix<f64>> {
        super::check_batch(batch, self.n_components())?;
        let mut acc = DVector::zeros(self.d);
        for &i in batch {
            let c = Self::loss_d1(self.margin(i, x)) * self.labels[i];
            acc.axpy(c, &self.features.row(i).transpose(), 1.0);
        }
        acc /= batch.len() as f64;
        Ok(DMatrix::from_column_slice(self.d, 1, acc.as_slice()))
    }

    fn batch_ehess_op(&self, batch: &[usize], x: &Point) -> Result<Box<dyn EuclidHessOp>> {
        super::check_batch(batch, self.n_components())?;
        // d×d dense mean Hessian; d ≤ 20 at desk scale
        let mut h = DMatrix::zeros(self.d, self.d);
        for &i in batch {
            let w = Self::loss_d2(self.margin(i, x)) / batch.len() as f64;
            let a = self.features.row(i);
            h.syger(w, &a.transpose(), &a.transpose(), 1.0);
        }
        // syger fills the lower triangle; mirror it
        for r in 0..self.d {
            for c in (r + 1)..self.d {
                h[(r, c)] = h[(c, r)];
            }
        }
        Ok(Box::new(DenseEuclidHess { h }))
    }
}

pub(crate) struct DenseEuclidHess {
    pub(crate) h: DMatrix<f64>,
}

impl EuclidHessOp for DenseEuclidHess {
    fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.h * u
    }
}
