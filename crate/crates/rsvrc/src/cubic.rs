//! Tangent-space cubic model
//!
//!   m(h) = ⟨v, h⟩ + ½⟨U h, h⟩ + (σ/6)‖h‖³,   h ∈ T_x M,
//!
//! solved exactly (secular equation in an orthonormal tangent basis, with
//! hard-case handling) or inexactly with δ-certification:
//!
//!   (1) m(h) ≤ −(σ/12)‖h‖³ + δ
//!   (2) ‖∇m(h)‖ ≤ σ^{1/3} δ^{2/3}
//!   (3) λ_min(∇²m(h)) ≥ −σ^{2/3} δ^{1/3}
//!
//! where ∇m(h) = v + U h + (σ/2)‖h‖ h and
//! ∇²m(h) = U + (σ/2)(‖h‖ I + h hᵀ/‖h‖) restricted to the tangent space.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point, TangentVector};
use crate::objectives::HessianOperator;

/// Residual tolerance for exact-mode optimality certificates.
pub const TOL_EXACT: f64 = 1e-8;

const SECULAR_MAX_ITER: usize = 200;
const INEXACT_MAX_ITER: usize = 10_000;

/// Cubic model over the tangent space at `x`.
pub struct CubicModel<'a> {
    pub manifold: &'a dyn Manifold,
    pub x: Point,
    /// Model gradient at the origin.
    pub v: TangentVector,
    /// Self-adjoint operator on T_x M.
    pub op: &'a dyn HessianOperator,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolutionMode {
    Exact,
    Inexact { delta: f64 },
}

pub struct CubicSolution {
    pub h: TangentVector,
    pub model_value: f64,
    pub grad_residual: f64,
    pub lambda_min_model_hess: f64,
    pub mode: SolutionMode,
}

impl<'a> CubicModel<'a> {
    pub fn new(
        manifold: &'a dyn Manifold,
        x: Point,
        v: TangentVector,
        op: &'a dyn HessianOperator,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(CubicModel { manifold, x, v, op, sigma })
    }

    /// m(h).
    pub fn value(&self, h: &TangentVector) -> Result<f64> {
        let m = self.manifold;
        let lin = m.inner(&self.x, &self.v, h)?;
        let uh = self.op.apply(h)?;
        let quad = m.inner(&self.x, &uh, h)?;
        let n = m.norm(h);
        Ok(lin + 0.5 * quad + self.sigma / 6.0 * n * n * n)
    }

    /// ∇m(h) = v + U h + (σ/2)‖h‖ h.
    pub fn grad(&self, h: &TangentVector) -> Result<TangentVector> {
        let uh = self.op.apply(h)?;
        let n = self.manifold.norm(h);
        self.v.add(&uh)?.add(&h.scaled(self.sigma / 2.0 * n))
    }

    /// Dense coordinate form (v_c, A) in the given orthonormal basis.
    fn to_coords(&self, basis: &[TangentVector]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let k = basis.len();
        let m = self.manifold;
        let mut vc = DVector::zeros(k);
        for (i, b) in basis.iter().enumerate() {
            vc[i] = m.inner(&self.x, &self.v, b)?;
        }
        let mut a = DMatrix::zeros(k, k);
        for (j, bj) in basis.iter().enumerate() {
            let ubj = self.op.apply(bj)?;
            for (i, bi) in basis.iter().enumerate() {
                a[(i, j)] = m.inner(&self.x, &ubj, bi)?;
            }
        }
        // symmetrize: the operator is self-adjoint up to roundoff
        let a = (&a + a.transpose()) * 0.5;
        Ok((vc, a))
    }

    fn from_coords(&self, basis: &[TangentVector], c: &DVector<f64>) -> TangentVector {
        let mut h = TangentVector::zero_at(&self.x);
        for (i, b) in basis.iter().enumerate() {
            h = TangentVector::new(self.x.clone(), h.ambient + c[i] * &b.ambient);
        }
        h
    }
}

/// Globally minimize the cubic model in an orthonormal tangent basis.
pub fn solve_exact(model: &CubicModel, basis: &[TangentVector]) -> Result<CubicSolution> {
    if basis.len() != model.manifold.dim() {
        return Err(Error::ContractViolation(format!(
            "basis has {} vectors, tangent space has dimension {}",
            basis.len(),
            model.manifold.dim()
        )));
    }
    let (vc, a) = model.to_coords(basis)?;
    let ec = EuclidCubic { v: vc, a, sigma: model.sigma };
    let c = ec.solve()?;
    let h = model.from_coords(basis, &c);
    let r = c.norm();
    let grad_residual = (&ec.v + &ec.a * &c + (ec.sigma / 2.0 * r) * &c).norm();
    Ok(CubicSolution {
        h,
        model_value: ec.value(&c),
        grad_residual,
        lambda_min_model_hess: ec.model_hess_lambda_min(&c),
        mode: SolutionMode::Exact,
    })
}

/// Produce a δ-inexact solution: gradient descent on the model from h = 0
/// with step 1/(‖U‖_op + σ·r̄), Armijo backtracking for robustness, checking
/// conditions (1)+(2) each iteration and (3) at candidate termination;
/// perturbed along the negative-curvature direction when (3) fails.
pub fn solve_inexact(
    model: &CubicModel,
    basis: &[TangentVector],
    delta: f64,
) -> Result<CubicSolution> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be > 0, got {delta}")));
    }
    let (vc, a) = model.to_coords(basis)?;
    let ec = EuclidCubic { v: vc, a, sigma: model.sigma };
    let sigma = ec.sigma;
    let grad_tol = sigma.powf(1.0 / 3.0) * delta.powf(2.0 / 3.0);
    let curv_tol = sigma.powf(2.0 / 3.0) * delta.powf(1.0 / 3.0);

    let op_norm = ec.op_norm();
    let c_g = ec.v.norm();
    let r_bar = (op_norm + (op_norm * op_norm + 2.0 * sigma * c_g).sqrt()) / sigma;
    let base_step = 1.0 / (op_norm + sigma * r_bar + 1e-30);

    let k = ec.v.len();
    let mut c: DVector<f64> = DVector::zeros(k);
    let mut m_cur = 0.0;
    let mut step = base_step;

    for _ in 0..INEXACT_MAX_ITER {
        let r = c.norm();
        let g = &ec.v + &ec.a * &c + (sigma / 2.0 * r) * &c;
        let gn = g.norm();

        let decrease_ok = m_cur <= -sigma / 12.0 * r * r * r + delta;
        if gn <= grad_tol && decrease_ok {
            let (lmin, q) = ec.model_hess_min_eigpair(&c);
            if lmin >= -curv_tol {
                let h = model.from_coords(basis, &c);
                return Ok(CubicSolution {
                    h,
                    model_value: m_cur,
                    grad_residual: gn,
                    lambda_min_model_hess: lmin,
                    mode: SolutionMode::Inexact { delta },
                });
            }
            // escape along the negative-curvature direction of the model
            // Hessian; the cubic term guarantees descent for a finite kick
            let tau = (-lmin) / sigma + delta.powf(1.0 / 3.0);
            let plus = &c + tau * &q;
            let minus = &c - tau * &q;
            let (mp, mm) = (ec.value(&plus), ec.value(&minus));
            if mp < mm {
                c = plus;
                m_cur = mp;
            } else {
                c = minus;
                m_cur = mm;
            }
            step = base_step;
            continue;
        }

        // Armijo backtracking along -g, growing the step back when accepted
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &c - t * &g;
            let m_cand = ec.value(&cand);
            if m_cand <= m_cur - 1e-4 * t * gn * gn {
                c = cand;
                m_cur = m_cand;
                step = (t * 2.0).min(base_step * 1e4);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // gradient is numerically flat; treat as converged candidate
            let (lmin, q) = ec.model_hess_min_eigpair(&c);
            if gn <= grad_tol.max(1e-14) && lmin >= -curv_tol {
                let h = model.from_coords(basis, &c);
                return Ok(CubicSolution {
                    h,
                    model_value: m_cur,
                    grad_residual: gn,
                    lambda_min_model_hess: lmin,
                    mode: SolutionMode::Inexact { delta },
                });
            }
            let tau = (-lmin).max(0.0) / sigma + delta.powf(1.0 / 3.0);
            let plus = &c + tau * &q;
            let minus = &c - tau * &q;
            let (mp, mm) = (ec.value(&plus), ec.value(&minus));
            if mp < mm {
                c = plus;
                m_cur = mp;
            } else {
                c = minus;
                m_cur = mm;
            }
            step = base_step;
        }
    }
    Err(Error::SubproblemFailure(format!(
        "inexact solver exceeded {INEXACT_MAX_ITER} iterations (delta = {delta:.3e})"
    )))
}

/// Evaluate the three δ-inexactness conditions independently.
pub fn verify_inexact(
    model: &CubicModel,
    basis: &[TangentVector],
    h: &TangentVector,
    delta: f64,
) -> Result<(bool, bool, bool)> {
    let m = model.manifold;
    let sigma = model.sigma;
    let mh = model.value(h)?;
    let r = m.norm(h);
    let cond1 = mh <= -sigma / 12.0 * r * r * r + delta;

    let g = model.grad(h)?;
    let cond2 = m.norm(&g) <= sigma.powf(1.0 / 3.0) * delta.powf(2.0 / 3.0);

    let (_, a) = model.to_coords(basis)?;
    let mut c = DVector::zeros(basis.len());
    for (i, b) in basis.iter().enumerate() {
        c[i] = m.inner(&model.x, h, b)?;
    }
    let ec = EuclidCubic { v: DVector::zeros(basis.len()), a, sigma };
    let (lmin, _) = ec.model_hess_min_eigpair(&c);
    let cond3 = lmin >= -sigma.powf(2.0 / 3.0) * delta.powf(1.0 / 3.0);
    Ok((cond1, cond2, cond3))
}

/// Euclidean cubic model in orthonormal coordinates.
pub(crate) struct EuclidCubic {
    pub v: DVector<f64>,
    pub a: DMatrix<f64>,
    pub sigma: f64,
}

impl EuclidCubic {
    pub fn value(&self, c: &DVector<f64>) -> f64 {
        let r = c.norm();
        self.v.dot(c) + 0.5 * (c.transpose() * &self.a * c)[(0, 0)] + self.sigma / 6.0 * r * r * r
    }

    fn op_norm(&self) -> f64 {
        let eig = crate::linalg::sym_eigen(&self.a);
        eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    /// ∇²m(c) = A + (σ/2)(‖c‖ I + c cᵀ/‖c‖); smallest eigenpair.
    fn model_hess_min_eigpair(&self, c: &DVector<f64>) -> (f64, DVector<f64>) {
        let k = c.len();
        let r = c.norm();
        let mut h = self.a.clone();
        for i in 0..k {
            h[(i, i)] += self.sigma / 2.0 * r;
        }
        if r > 0.0 {
            let chat = c / r;
            for i in 0..k {
                for j in 0..k {
                    h[(i, j)] += self.sigma / 2.0 * r * chat[i] * chat[j];
                }
            }
        }
        let eig = crate::linalg::sym_eigen(&h);
        let mut idx = 0;
        for i in 1..k {
            if eig.eigenvalues[i] < eig.eigenvalues[idx] {
                idx = i;
            }
        }
        (eig.eigenvalues[idx], eig.eigenvectors.column(idx).into_owned())
    }

    fn model_hess_lambda_min(&self, c: &DVector<f64>) -> f64 {
        self.model_hess_min_eigpair(c).0
    }

    /// Global minimizer via the secular equation ‖(A + (σr/2)I)⁻¹ v‖ = r on
    /// r ≥ max(0, −2λ₁/σ), with hard-case handling.
    pub fn solve(&self) -> Result<DVector<f64>> {
        let k = self.v.len();
        let sigma = self.sigma;
        let eig = crate::linalg::sym_eigen(&self.a);
        // ascending eigenvalue order
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let lam: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let q = DMatrix::from_columns(
            &order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>(),
        );
        let vt = q.transpose() * &self.v;

        let l1 = lam[0];
        let scale = lam.iter().fold(1.0f64, |m, &l| m.max(l.abs()));
        let r_lb = (0.0f64).max(-2.0 * l1 / sigma);
        let vnorm = self.v.norm();

        let bottom_tol = 1e-12 * scale.max(1.0);
        let is_bottom: Vec<bool> = lam.iter().map(|&l| l - l1 <= bottom_tol).collect();

        let norm_h = |r: f64| -> f64 {
            let mut s = 0.0;
            for i in 0..k {
                let d = lam[i] + sigma * r / 2.0;
                if d <= 1e-300 {
                    if vt[i].abs() <= 1e-14 * (1.0 + vnorm) {
                        continue;
                    }
                    return f64::INFINITY;
                }
                s += (vt[i] / d) * (vt[i] / d);
            }
            s.sqrt()
        };

        if vnorm == 0.0 && l1 >= 0.0 {
            // the model is nonnegative and 0 attains it
            return Ok(DVector::zeros(k));
        }

        if l1 < 0.0 {
            let bottom_mass: f64 = (0..k)
                .filter(|&i| is_bottom[i])
                .map(|i| vt[i] * vt[i])
                .sum();
            let singular_at_lb = bottom_mass > (1e-14 * (1.0 + vnorm)).powi(2);
            if !singular_at_lb {
                // v ⟂ bottom eigenspace: check whether the interior secular
                // equation still has a root at or right of r_lb
                let norm_perp_at_lb = {
                    let mut s = 0.0;
                    for i in 0..k {
                        if is_bottom[i] {
                            continue;
                        }
                        let d = lam[i] + sigma * r_lb / 2.0;
                        s += (vt[i] / d) * (vt[i] / d);
                    }
                    s.sqrt()
                };
                if norm_perp_at_lb <= r_lb {
                    // hard case: r = −2λ₁/σ plus a bottom-eigenvector component
                    let mut ct = DVector::zeros(k);
                    for i in 0..k {
                        if is_bottom[i] {
                            continue;
                        }
                        ct[i] = -vt[i] / (lam[i] + sigma * r_lb / 2.0);
                    }
                    let alpha = (r_lb * r_lb - norm_perp_at_lb * norm_perp_at_lb)
                        .max(0.0)
                        .sqrt();
                    // tie between ±alpha: orient the bottom eigenvector so its
                    // first nonzero component is positive, then take +alpha
                    let qcol = q.column(0);
                    let mut sign = 1.0;
                    for i in 0..k {
                        if qcol[i].abs() > 1e-14 {
                            sign = qcol[i].signum();
                            break;
                        }
                    }
                    ct[0] = sign * alpha; // bottom index 0 in sorted order
                    return Ok(self.polish(&q * ct));
                }
            }
        }

        // easy case: bracket and solve phi(r) = ‖h(r)‖ − r = 0
        let mut lo = r_lb;
        let c_g = self.v.norm();
        let c_h = self.op_norm();
        let mut hi = ((c_h + (c_h * c_h + 2.0 * sigma * c_g).sqrt()) / sigma).max(r_lb + 1e-12);
        for _ in 0..200 {
            if norm_h(hi) - hi <= 0.0 {
                break;
            }
            hi *= 2.0;
        }
        if norm_h(hi) - hi > 0.0 {
            return Err(Error::SubproblemFailure(
                "secular upper bracket not found".into(),
            ));
        }

        let mut r = 0.5 * (lo + hi).max(lo + 1e-14);
        let mut converged = false;
        for _ in 0..SECULAR_MAX_ITER {
            let n = norm_h(r);
            let phi = n - r;
            // The gradient residual of the recovered step scales like
            // (σ/2)·|phi|·r, so phi must be resolved well below the final
            // certification tolerance even for large-radius solutions.
            if phi.abs() <= 1e-14 * (1.0 + r) || hi - lo <= f64::EPSILON * (1.0 + r) {
                converged = true;
                break;
            }
            if phi > 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            // Newton step on phi, safeguarded by the bisection bracket
            let mut dn = 0.0;
            if n.is_finite() && n > 0.0 {
                for i in 0..k {
                    let d = lam[i] + sigma * r / 2.0;
                    dn += vt[i] * vt[i] / (d * d * d);
                }
                dn *= -sigma / (2.0 * n);
            }
            let dphi = dn - 1.0;
            let newton = if dphi < 0.0 && n.is_finite() { r - phi / dphi } else { f64::NAN };
            r = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        if !converged {
            let n = norm_h(r);
            if (n - r).abs() > 1e-9 * (1.0 + r) {
                return Err(Error::SubproblemFailure(format!(
                    "secular root find did not converge within {SECULAR_MAX_ITER} iterations \
                     (residual {:.3e})",
                    (n - r).abs()
                )));
            }
        }

        let mut ct = DVector::zeros(k);
        for i in 0..k {
            let d = lam[i] + sigma * r / 2.0;
            ct[i] = if d.abs() > 1e-300 { -vt[i] / d } else { 0.0 };
        }
        Ok(self.polish(&q * ct))
    }

    /// Newton refinement of a near-optimal step. Close to the hard case the
    /// secular root is limited by the floating-point resolution of r (the
    /// residual scales like (σ/2)·|‖c‖ − r|·‖c‖, which can exceed 1e-8 for
    /// large-radius solutions), while ∇²m at the minimizer is PSD, so a few
    /// damped Newton steps on ∇m recover the remaining digits.
    fn polish(&self, mut c: DVector<f64>) -> DVector<f64> {
        let k = c.len();
        let grad = |c: &DVector<f64>| -> DVector<f64> {
            let r = c.norm();
            &self.v + &self.a * c + (self.sigma / 2.0 * r) * c
        };
        let mut g = grad(&c);
        for _ in 0..5 {
            let r = c.norm();
            if g.norm() <= 1e-14 * (1.0 + self.sigma / 2.0 * r * r) {
                break;
            }
            let mut h = self.a.clone();
            for i in 0..k {
                h[(i, i)] += self.sigma / 2.0 * r;
            }
            if r > 0.0 {
                let chat = &c / r;
                h += self.sigma / 2.0 * r * &chat * chat.transpose();
            }
            let Some(delta) = h.lu().solve(&(-&g)) else { break };
            let cand = &c + delta;
            let g_cand = grad(&cand);
            if g_cand.norm() < g.norm() {
                c = cand;
                g = g_cand;
            } else {
                break;
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_min(ec: &EuclidCubic, radius: f64, points: usize) -> f64 {
        // dense grid oracle over the cube [-radius, radius]^k, k <= 3
        let k = ec.v.len();
        assert!(k <= 3);
        let mut best = f64::INFINITY;
        let step = 2.0 * radius / (points - 1) as f64;
        let mut idx = vec![0usize; k];
        loop {
            let c = DVector::from_fn(k, |i, _| -radius + idx[i] as f64 * step);
            best = best.min(ec.value(&c));
            let mut carry = 0;
            loop {
                if carry == k {
                    return best;
                }
                idx[carry] += 1;
                if idx[carry] < points {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
        }
    }

    #[test]
    fn zero_gradient_psd_gives_zero_step() {
        let ec = EuclidCubic {
            v: DVector::zeros(3),
            a: DMatrix::identity(3, 3),
            sigma: 1.0,
        };
        let c = ec.solve().unwrap();
        assert_eq!(c.norm(), 0.0);
    }

    #[test]
    fn one_dimensional_known_solution() {
        // minimize h + h³/2: h* = -sqrt(2/3)
        let ec = EuclidCubic {
            v: DVector::from_column_slice(&[1.0]),
            a: DMatrix::zeros(1, 1),
            sigma: 3.0,
        };
        let c = ec.solve().unwrap();
        assert!((c[0] + (2.0f64 / 3.0).sqrt()).abs() < 1e-10, "c = {}", c[0]);
        let g = grid_min(&ec, 2.0 * c.norm(), 2001);
        assert!(ec.value(&c) <= g + 1e-6);
    }

    #[test]
    fn hard_case_two_dimensional() {
        // v=(0,1), A=diag(-2,1), sigma=2: r = 2, h2 = -1/3, h1 = ±sqrt(4-1/9)
        let ec = EuclidCubic {
            v: DVector::from_column_slice(&[0.0, 1.0]),
            a: DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]),
            sigma: 2.0,
        };
        let c = ec.solve().unwrap();
        let r = c.norm();
        assert!((r - 2.0).abs() < 1e-10, "r = {r}");
        assert!((c[1] + 1.0 / 3.0).abs() < 1e-10, "h2 = {}", c[1]);
        assert!((c[0].abs() - (4.0f64 - 1.0 / 9.0).sqrt()).abs() < 1e-10);
        // optimality conditions
        let g = (&ec.v + &ec.a * &c + (ec.sigma / 2.0 * r) * &c).norm();
        assert!(g < 1e-9);
        // global optimality vs grid
        let gm = grid_min(&ec, 2.0 * r, 201);
        assert!(ec.value(&c) <= gm + 1e-6);
    }

    #[test]
    fn random_small_models_beat_the_grid() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(123);
        for trial in 0..50 {
            let k = 1 + trial % 3;
            let v = DVector::from_fn(k, |_, _| rng.gen_range(-2.0..2.0));
            let mut a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-2.0..2.0));
            a = (&a + a.transpose()) * 0.5;
            let ec = EuclidCubic { v, a, sigma: rng.gen_range(0.2..4.0) };
            let c = ec.solve().unwrap();
            let r = c.norm();
            let resid = (&ec.v + &ec.a * &c + (ec.sigma / 2.0 * r) * &c).norm();
            assert!(resid <= 1e-8 * (1.0 + ec.v.norm() + ec.sigma), "trial {trial}");
            let radius = (2.0 * r).max(0.5);
            let gm = grid_min(&ec, radius, 101);
            assert!(
                ec.value(&c) <= gm + 1e-6,
                "trial {trial}: model {} vs grid {}",
                ec.value(&c),
                gm
            );
        }
    }

    #[test]
    fn secular_second_order_condition_holds() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(77);
        for _ in 0..100 {
            let k = 5;
            let v = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
            let mut a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.5..1.5));
            a = (&a + a.transpose()) * 0.5;
            let ec = EuclidCubic { v, a, sigma: rng.gen_range(0.1..3.0) };
            let c = ec.solve().unwrap();
            let r = c.norm();
            let eig = crate::linalg::sym_eigen(&ec.a);
            let l1 = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            assert!(l1 + ec.sigma / 2.0 * r >= -1e-8);
            // decrease guarantee
            assert!(ec.value(&c) <= -ec.sigma / 12.0 * r * r * r + 1e-10);
        }
    }
}
