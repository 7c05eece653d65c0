//! Symmetric positive definite manifold S^p_{++} with the affine-invariant
//! metric ⟨U, V⟩_X = tr(X⁻¹ U X⁻¹ V).
//!
//! A Hadamard manifold: the injectivity radius is infinite. Closed forms:
//!   Exp_X(U) = X^{1/2} expm(X^{-1/2} U X^{-1/2}) X^{1/2}
//!   Log_X(Y) = X^{1/2} logm(X^{-1/2} Y X^{-1/2}) X^{1/2}
//!   Γ_X^Y(U) = E U Eᵀ,  E = (Y X⁻¹)^{1/2}
//!   d(X, Y)  = ‖logm(X^{-1/2} Y X^{-1/2})‖_F

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{check_same_base, Manifold, Point, TangentVector, TransportMap, TOL_TANGENT};
use crate::linalg::{check_pd, expm_sym, inv_spd, invsqrtm_spd, logm_spd, sqrtm_spd, sym};

#[derive(Clone, Debug)]
pub struct SpdManifold {
    /// Matrix side length p ≥ 1.
    pub p: usize,
}

impl SpdManifold {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1);
        SpdManifold { p }
    }
}

struct SpdTransport {
    e: DMatrix<f64>,
    e_inv: DMatrix<f64>,
}

impl TransportMap for SpdTransport {
    fn forward(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(&self.e * u * self.e.transpose()))
    }
    fn backward(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(&self.e_inv * u * self.e_inv.transpose()))
    }
}

impl Manifold for SpdManifold {
    fn dim(&self) -> usize {
        self.p * (self.p + 1) / 2
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.p, self.p)
    }

    fn injectivity_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.ambient.shape() != (self.p, self.p) {
            return Err(Error::NotOnManifold(format!(
                "expected {0}x{0} matrix, got {1:?}",
                self.p,
                x.ambient.shape()
            )));
        }
        let asym = (&x.ambient - x.ambient.transpose()).amax();
        if asym > crate::geometry::TOL_MANIFOLD * (1.0 + x.ambient.amax()) {
            return Err(Error::NotOnManifold(format!(
                "asymmetry {asym:.3e} exceeds tolerance"
            )));
        }
        check_pd(&x.ambient).map_err(|e| Error::NotOnManifold(e.to_string()))
    }

    fn check_tangent(&self, v: &TangentVector) -> Result<()> {
        self.check_point(&v.base)?;
        let asym = (&v.ambient - v.ambient.transpose()).amax();
        if asym > TOL_TANGENT * (1.0 + v.ambient.amax()) {
            return Err(Error::ContractViolation(format!(
                "tangent vector not symmetric: deviation {asym:.3e}"
            )));
        }
        Ok(())
    }

    fn inner(&self, x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        check_same_base(&u.base, x)?;
        check_same_base(&v.base, x)?;
        let xi = inv_spd(&x.ambient)?;
        Ok((&xi * &u.ambient * &xi * &v.ambient).trace())
    }

    fn exp(&self, x: &Point, v: &TangentVector) -> Result<Point> {
        check_same_base(&v.base, x)?;
        let s = sqrtm_spd(&x.ambient)?;
        let si = invsqrtm_spd(&x.ambient)?;
        let inner = sym(&(&si * &v.ambient * &si));
        let y = &s * expm_sym(&inner) * &s;
        Ok(Point::new(sym(&y)))
    }

    fn log(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let s = sqrtm_spd(&x.ambient)?;
        let si = invsqrtm_spd(&x.ambient)?;
        let inner = sym(&(&si * &y.ambient * &si));
        let l = logm_spd(&inner)?;
        Ok(TangentVector::new(x.clone(), sym(&(&s * l * &s))))
    }

    fn transport_pair(&self, x: &Point, y: &Point) -> Result<Box<dyn TransportMap>> {
        // E = (Y X⁻¹)^{1/2} computed via the congruence-stable form
        // X^{1/2} (X^{-1/2} Y X^{-1/2})^{1/2} X^{-1/2}.
        let s = sqrtm_spd(&x.ambient)?;
        let si = invsqrtm_spd(&x.ambient)?;
        let mid = sym(&(&si * &y.ambient * &si));
        let mid_half = sqrtm_spd(&mid)?;
        let mid_half_inv = invsqrtm_spd(&mid)?;
        let e = &s * &mid_half * &si;
        let e_inv = &s * &mid_half_inv * &si;
        Ok(Box::new(SpdTransport { e, e_inv }))
    }

    fn project(&self, x: &Point, w: &DMatrix<f64>) -> TangentVector {
        TangentVector::new(x.clone(), sym(w))
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let si = invsqrtm_spd(&x.ambient)?;
        let mid = sym(&(&si * &y.ambient * &si));
        Ok(logm_spd(&mid)?.norm())
    }

    fn egrad_to_rgrad(&self, x: &Point, egrad: &DMatrix<f64>) -> TangentVector {
        let g = &x.ambient * sym(egrad) * &x.ambient;
        TangentVector::new(x.clone(), sym(&g))
    }

    fn ehess_to_rhess(
        &self,
        x: &Point,
        egrad: &DMatrix<f64>,
        ehess_u: &DMatrix<f64>,
        u: &TangentVector,
    ) -> TangentVector {
        let term1 = &x.ambient * sym(ehess_u) * &x.ambient;
        let term2 = sym(&(&u.ambient * sym(egrad) * &x.ambient));
        TangentVector::new(x.clone(), sym(&term1) + term2)
    }

    fn tangent_basis(&self, x: &Point) -> Vec<TangentVector> {
        // X^{1/2} B X^{1/2} over a Frobenius-orthonormal symmetric basis B
        // is orthonormal under the affine-invariant metric at X.
        let p = self.p;
        let s = sqrtm_spd(&x.ambient).expect("base point must be PD");
        let mut basis = Vec::with_capacity(self.dim());
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..p {
            for j in i..p {
                let mut b = DMatrix::zeros(p, p);
                if i == j {
                    b[(i, i)] = 1.0;
                } else {
                    b[(i, j)] = inv_sqrt2;
                    b[(j, i)] = inv_sqrt2;
                }
                basis.push(TangentVector::new(x.clone(), sym(&(&s * b * &s))));
            }
        }
        basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn pt(p: usize, data: &[f64]) -> Point {
        Point::new(DMatrix::from_row_slice(p, p, data))
    }

    fn random_spd(p: usize, rng: &mut ChaCha20Rng) -> Point {
        let a = DMatrix::from_fn(p, p, |_, _| {
            rand::Rng::sample::<f64, _>(rng, rand_distr::StandardNormal)
        });
        Point::new(&a * a.transpose() + DMatrix::identity(p, p) * 0.5)
    }

    #[test]
    fn inner_examples() {
        let m = SpdManifold::new(2);
        let x = pt(2, &[1.0, 0.0, 0.0, 1.0]);
        let i2 = TangentVector::new(x.clone(), DMatrix::identity(2, 2));
        assert!((m.inner(&x, &i2, &i2).unwrap() - 2.0).abs() < 1e-14);

        // X = diag(2,1), U = V = diag(2,0): tr(X⁻¹UX⁻¹V) = (1/2·2)² summed = 1
        let x = pt(2, &[2.0, 0.0, 0.0, 1.0]);
        let u = TangentVector::new(x.clone(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert!((m.inner(&x, &u, &u).unwrap() - 1.0).abs() < 1e-14);

        // symmetry in (u, v)
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = random_spd(2, &mut rng);
        let u = m.random_tangent(&x, &mut rng);
        let v = m.random_tangent(&x, &mut rng);
        let a = m.inner(&x, &u, &v).unwrap();
        let b = m.inner(&x, &v, &u).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn exp_log_examples_at_identity() {
        let m = SpdManifold::new(2);
        let x = pt(2, &[1.0, 0.0, 0.0, 1.0]);
        let u = TangentVector::new(x.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let y = m.exp(&x, &u).unwrap();
        assert!((y.ambient[(0, 0)] - std::f64::consts::E).abs() < 1e-12);
        assert!((y.ambient[(1, 1)] - 1.0).abs() < 1e-12);

        let back = m.log(&x, &y).unwrap();
        assert!((&back.ambient - &u.ambient).amax() < 1e-12);
    }

    #[test]
    fn exp_log_round_trip_random() {
        let m = SpdManifold::new(4);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = random_spd(4, &mut rng);
            let u = m.random_tangent(&x, &mut rng).scaled(1.7);
            let y = m.exp(&x, &u).unwrap();
            m.check_point(&y).unwrap();
            let back = m.log(&x, &y).unwrap();
            assert!((&back.ambient - &u.ambient).amax() < 1e-8 * (1.0 + u.ambient.amax()));
            // norm of log equals distance
            let d = m.distance(&x, &y).unwrap();
            assert!((m.norm(&back) - d).abs() < 1e-10 * (1.0 + d));
        }
    }

    #[test]
    fn distance_examples() {
        let m = SpdManifold::new(2);
        let x = pt(2, &[1.0, 0.0, 0.0, 1.0]);
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let y = pt(2, &[e2, 0.0, 0.0, 1.0]);
        assert!((m.distance(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(m.distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn distance_affine_invariance() {
        let m = SpdManifold::new(3);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x = random_spd(3, &mut rng);
        let y = random_spd(3, &mut rng);
        let a = DMatrix::from_fn(3, 3, |_, _| {
            rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
        }) + DMatrix::identity(3, 3) * 2.0;
        let xa = Point::new(sym(&(&a * &x.ambient * a.transpose())));
        let ya = Point::new(sym(&(&a * &y.ambient * a.transpose())));
        let d1 = m.distance(&x, &y).unwrap();
        let d2 = m.distance(&xa, &ya).unwrap();
        assert!((d1 - d2).abs() < 1e-8 * (1.0 + d1));
    }

    #[test]
    fn transport_examples_and_isometry() {
        let m = SpdManifold::new(2);
        let x = pt(2, &[1.0, 0.0, 0.0, 1.0]);
        let y = pt(2, &[4.0, 0.0, 0.0, 1.0]);
        let u = TangentVector::new(x.clone(), DMatrix::identity(2, 2));
        // E = Y^{1/2} = diag(2,1), so ΓU = diag(4,1)
        let t = m.transport(&x, &y, &u).unwrap();
        assert!((t.ambient[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((t.ambient[(1, 1)] - 1.0).abs() < 1e-12);

        // Y = X gives identity transport
        let same = m.transport(&x, &x, &u).unwrap();
        assert!((&same.ambient - &u.ambient).amax() < 1e-12);

        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = random_spd(3, &mut rng);
            let y = random_spd(3, &mut rng);
            let m3 = SpdManifold::new(3);
            let u = m3.random_tangent(&x, &mut rng);
            let v = m3.random_tangent(&x, &mut rng);
            let tu = m3.transport(&x, &y, &u).unwrap();
            let tv = m3.transport(&x, &y, &v).unwrap();
            let a = m3.inner(&x, &u, &v).unwrap();
            let b = m3.inner(&y, &tu, &tv).unwrap();
            assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn transport_round_trips_through_backward() {
        let m = SpdManifold::new(3);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let x = random_spd(3, &mut rng);
        let y = random_spd(3, &mut rng);
        let u = m.random_tangent(&x, &mut rng);
        let map = m.transport_pair(&x, &y).unwrap();
        let fwd = map.forward(&u.ambient);
        let back = map.backward(&fwd);
        assert!((&back - &u.ambient).amax() < 1e-10);
    }

    #[test]
    fn tangent_basis_orthonormal_under_affine_metric() {
        let m = SpdManifold::new(4);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let x = random_spd(4, &mut rng);
        let basis = m.tangent_basis(&x);
        assert_eq!(basis.len(), 10);
        for (i, bi) in basis.iter().enumerate() {
            m.check_tangent(bi).unwrap();
            for (j, bj) in basis.iter().enumerate() {
                let g = m.inner(&x, bi, bj).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "entry ({i},{j}) = {g}");
            }
        }
    }

    #[test]
    fn non_pd_inputs_rejected() {
        let m = SpdManifold::new(2);
        let bad = pt(2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(m.check_point(&bad).is_err());
        let x = pt(2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(m.log(&x, &bad).is_err());
        assert!(m.distance(&x, &bad).is_err());
    }
}
