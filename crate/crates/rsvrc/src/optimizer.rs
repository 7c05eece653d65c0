//! R-SVRC: epochs with full gradient/Hessian anchors, inner iterations with
//! variance-reduced estimators transported from the anchor, a cubic-regularized
//! Newton step per iteration, and the uniformly-sampled output rule. Includes
//! the full-batch cubic-regularization baseline (CRC) and stationarity
//! diagnostics.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cubic::{solve_exact, solve_inexact, CubicModel};
use crate::error::{Error, Result};
use crate::geometry::{check_same_base, Manifold, Point, TangentVector, TransportMap};
use crate::lanczos::{lambda_min as lanczos_lambda_min, LanczosOptions};
use crate::objectives::{
    full_so_eval, riem_hess_op_batch, riem_hess_op_full, FiniteSumObjective, HessianOperator,
    RiemannianHessOp, SoCounter,
};
use crate::rng::{stream_rng, Stream};

/// All algorithm hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Cubic regularization parameter σ > 0.
    pub sigma: f64,
    /// Number of epochs S ≥ 1.
    pub epochs: usize,
    /// Epoch length T ≥ 1.
    pub epoch_len: usize,
    /// Gradient batch size b_g.
    pub batch_grad: usize,
    /// Hessian batch size b_h.
    pub batch_hess: usize,
    /// Subproblem inexactness δ; 0 selects the exact subsolver.
    #[serde(default)]
    pub delta: f64,
    pub seed: u64,
    /// Replicate index; keys the RNG streams so replicates are independent.
    #[serde(default)]
    pub replicate: u64,
    /// Sample batches with replacement (matches the estimator analysis);
    /// false switches to without-replacement draws.
    #[serde(default = "default_true")]
    pub with_replacement: bool,
    /// Iterations between metric snapshots.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Hessian-Lipschitz estimate used only inside μ(x); defaults to σ/2.
    #[serde(default)]
    pub l_h_estimate: Option<f64>,
}

fn default_true() -> bool {
    true
}
fn default_record_every() -> usize {
    1
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig("sigma must be > 0".into()));
        }
        if self.epochs < 1 || self.epoch_len < 1 {
            return Err(Error::InvalidConfig("S >= 1 and T >= 1 required".into()));
        }
        if self.batch_grad < 1 || self.batch_grad > n || self.batch_hess < 1 || self.batch_hess > n
        {
            return Err(Error::InvalidConfig(format!(
                "batch sizes must lie in [1, {n}]"
            )));
        }
        if self.delta < 0.0 {
            return Err(Error::InvalidConfig("delta must be >= 0".into()));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn l_h(&self) -> f64 {
        self.l_h_estimate.unwrap_or(self.sigma / 2.0)
    }
}

/// Epoch anchor: full gradient and Hessian at x̂^s.
pub struct EpochAnchor<'a> {
    pub x_hat: Point,
    pub g_full: TangentVector,
    pub h_full: RiemannianHessOp<'a>,
}

/// Per-snapshot metrics stream.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub epoch: usize,
    pub inner: usize,
    pub so_calls: u64,
    pub seconds: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub lambda_min: f64,
    pub mu: f64,
}

pub struct RunOutput {
    /// Iterate at a uniformly sampled (s, t) — the algorithm's return rule.
    pub x_uniform: Point,
    /// Final iterate, used by the experiment plots.
    pub x_last: Point,
    pub records: Vec<Snapshot>,
    pub so_calls: u64,
}

/// Variance-reduced gradient estimator (one inner iteration):
///
///   v = Γ(g^s) + [ (1/b)Σ grad f_i(x_t) − Γ((1/b)Σ grad f_i(x̂)) ]
///       − Γ( ((1/b)Σ Hess f_i(x̂) − H^s)[η̂] )
///
/// Anchor-point component quantities are served from the epoch evaluation,
/// so the iteration consumes b_g SO calls.
pub fn vr_gradient(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    anchor: &EpochAnchor,
    x_t: &Point,
    eta_hat: &TangentVector,
    batch: &[usize],
    counter: &SoCounter,
) -> Result<TangentVector> {
    check_same_base(&eta_hat.base, &anchor.x_hat)?;
    let map = transport_checked(m, &anchor.x_hat, x_t)?;
    let scratch = SoCounter::new();

    let grad_t = m.egrad_to_rgrad(x_t, &obj.batch_egrad(batch, x_t)?);
    let grad_anchor = m.egrad_to_rgrad(&anchor.x_hat, &obj.batch_egrad(batch, &anchor.x_hat)?);

    let batch_hess_anchor = riem_hess_op_batch(obj, m, &anchor.x_hat, batch, &scratch)?;
    let corr = batch_hess_anchor
        .apply(eta_hat)?
        .sub(&anchor.h_full.apply(eta_hat)?)?;

    let mut v = map.forward(&anchor.g_full.ambient);
    v += &grad_t.ambient;
    v -= map.forward(&grad_anchor.ambient);
    v -= map.forward(&corr.ambient);
    counter.add(batch.len() as u64);
    Ok(TangentVector::new(x_t.clone(), v))
}

/// Variance-reduced Hessian estimator as an operator on T_{x_t}M:
///
///   U = Γ ∘ H^s ∘ Γ⁻¹ + (1/b)Σ Hess f_j(x_t) − Γ ∘ ((1/b)Σ Hess f_j(x̂)) ∘ Γ⁻¹
pub struct VrHessianOp<'a> {
    x_t: Point,
    x_hat: Point,
    map: Box<dyn TransportMap>,
    anchor_op: &'a RiemannianHessOp<'a>,
    batch_t: RiemannianHessOp<'a>,
    batch_anchor: RiemannianHessOp<'a>,
}

impl HessianOperator for VrHessianOp<'_> {
    fn base_point(&self) -> &Point {
        &self.x_t
    }

    fn apply(&self, u: &TangentVector) -> Result<TangentVector> {
        check_same_base(&u.base, &self.x_t)?;
        let u_back = TangentVector::new(self.x_hat.clone(), self.map.backward(&u.ambient));
        let anchor_term = self.map.forward(&self.anchor_op.apply(&u_back)?.ambient);
        let batch_term = self.batch_t.apply(u)?;
        let anchor_batch_term = self.map.forward(&self.batch_anchor.apply(&u_back)?.ambient);
        Ok(TangentVector::new(
            self.x_t.clone(),
            anchor_term + batch_term.ambient - anchor_batch_term,
        ))
    }
}

pub fn vr_hessian_operator<'a>(
    obj: &dyn FiniteSumObjective,
    m: &'a dyn Manifold,
    anchor: &'a EpochAnchor<'a>,
    x_t: &Point,
    batch: &[usize],
    counter: &SoCounter,
) -> Result<VrHessianOp<'a>> {
    let map = transport_checked(m, &anchor.x_hat, x_t)?;
    let scratch = SoCounter::new();
    let batch_t = riem_hess_op_batch(obj, m, x_t, batch, &scratch)?;
    let batch_anchor = riem_hess_op_batch(obj, m, &anchor.x_hat, batch, &scratch)?;
    counter.add(batch.len() as u64);
    Ok(VrHessianOp {
        x_t: x_t.clone(),
        x_hat: anchor.x_hat.clone(),
        map,
        anchor_op: &anchor.h_full,
        batch_t,
        batch_anchor,
    })
}

fn transport_checked(
    m: &dyn Manifold,
    x_hat: &Point,
    x_t: &Point,
) -> Result<Box<dyn TransportMap>> {
    let inj = m.injectivity_radius();
    if inj.is_finite() {
        let d = m.distance(x_hat, x_t)?;
        if d >= inj {
            return Err(Error::OutsideInjectivityRadius(format!(
                "d(anchor, iterate) = {d:.6} >= inj(M) = {inj:.6}; \
                 sigma is too small to confine the epoch (see the sigma lower-bound check)"
            )));
        }
    }
    m.transport_pair(x_hat, x_t)
}

/// μ(x) = max{ ‖grad F(x)‖^{3/2}, max(0, −λ_min)³ / L_H^{3/2} }.
pub fn mu_value(grad_norm: f64, lambda_min: f64, l_h: f64) -> f64 {
    let first = grad_norm.powf(1.5);
    let neg = (-lambda_min).max(0.0);
    let second = neg * neg * neg / l_h.powf(1.5);
    first.max(second)
}

/// Smallest Rayleigh quotient of Hess F(x) over T_xM. Dense tangent-basis
/// eigenvalue for intrinsic dimension ≤ 64, Lanczos above that.
pub fn lambda_min_hess(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    rng: &mut dyn rand::RngCore,
) -> Result<f64> {
    let scratch = SoCounter::new();
    let op = riem_hess_op_full(obj, m, x, &scratch)?;
    lambda_min_of_op(m, x, &op, rng)
}

pub(crate) fn lambda_min_of_op(
    m: &dyn Manifold,
    x: &Point,
    op: &dyn HessianOperator,
    rng: &mut dyn rand::RngCore,
) -> Result<f64> {
    if m.dim() <= 64 {
        let basis = m.tangent_basis(x);
        let dense = crate::diagnostics::dense_hessian_matrix(m, x, op, &basis)?;
        let eig = crate::linalg::sym_eigen(&dense);
        Ok(eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min))
    } else {
        lanczos_lambda_min(m, x, op, rng, &LanczosOptions::default())
    }
}

/// Advisory check of the σ lower bound that confines an epoch within the
/// injectivity radius; never blocks a run.
#[derive(Clone, Debug)]
pub struct SigmaBoundReport {
    /// false on manifolds with infinite injectivity radius.
    pub applicable: bool,
    pub threshold: f64,
    pub sigma: f64,
    pub passes: Option<bool>,
}

pub fn sigma_lower_bound_check(
    cfg: &SolverConfig,
    m: &dyn Manifold,
    c_g: f64,
    c_h: f64,
) -> SigmaBoundReport {
    let inj = m.injectivity_radius();
    if !inj.is_finite() {
        return SigmaBoundReport {
            applicable: false,
            threshold: 0.0,
            sigma: cfg.sigma,
            passes: None,
        };
    }
    let t = cfg.epoch_len as f64;
    let threshold = if cfg.delta == 0.0 {
        2.0 * (c_g * t * t + inj * c_h * t) / (inj * inj)
    } else {
        let d23 = cfg.delta.powf(2.0 / 3.0);
        let num = t * t * d23
            + (t.powi(4) * d23 * d23 + 2.0 * inj * inj * (inj * t * c_h + c_g * t * t)).sqrt();
        (num / (inj * inj)).powi(2)
    };
    SigmaBoundReport {
        applicable: true,
        threshold,
        sigma: cfg.sigma,
        passes: Some(cfg.sigma > threshold),
    }
}

/// Advisory lower bounds (b_g, b_h) on the batch sizes from the convergence
/// theorem, given k̄ = 2σ/L_H, epoch length T ≥ 2, the curvature constant
/// ζ ≥ 1, and the ambient dimension d. The constants are analysis artifacts
/// and far from tight; the bounds are reported, never enforced.
pub fn batch_size_advisory(k_bar: f64, t: usize, zeta: f64, d: usize) -> Result<(f64, f64)> {
    if !(k_bar > 0.0) || t < 2 || !(zeta >= 1.0) || d < 2 {
        return Err(Error::InvalidConfig(format!(
            "batch size advisory needs k_bar > 0, T >= 2, zeta >= 1, d >= 2 \
             (got k_bar = {k_bar}, T = {t}, zeta = {zeta}, d = {d})"
        )));
    }
    let w = (zeta - 1.0).sqrt() + 1.0;
    let tf = t as f64;
    let b_g = 3000f64.powf(4.0 / 3.0) * tf.powi(4) * w.powi(4) / (k_bar * k_bar);
    let root = (k_bar / (193.0 * tf * w) + 0.125).sqrt() - 0.125f64.sqrt();
    let b_h = std::f64::consts::E * (d as f64).ln() / (root * root);
    Ok((b_g, b_h))
}

fn sample_batch(
    rng: &mut impl Rng,
    n: usize,
    size: usize,
    with_replacement: bool,
) -> Vec<usize> {
    if with_replacement {
        (0..size).map(|_| rng.gen_range(0..n)).collect()
    } else {
        // partial Fisher-Yates
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..size {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        idx.truncate(size);
        idx
    }
}

fn snapshot(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x: &Point,
    epoch: usize,
    inner: usize,
    counter: &SoCounter,
    start: Instant,
    l_h: f64,
    probe_rng: &mut dyn rand::RngCore,
) -> Result<Snapshot> {
    // diagnostics are not oracle-counted
    let scratch = SoCounter::new();
    let f = obj.value(x)?;
    let (_, grad, hess) = full_so_eval(obj, m, x, &scratch)?;
    let grad_norm = m.norm(&grad);
    let lmin = lambda_min_of_op(m, x, &hess, probe_rng)?;
    Ok(Snapshot {
        epoch,
        inner,
        so_calls: counter.get(),
        seconds: start.elapsed().as_secs_f64(),
        f,
        grad_norm,
        lambda_min: lmin,
        mu: mu_value(grad_norm, lmin, l_h),
    })
}

fn solve_step(
    m: &dyn Manifold,
    x: &Point,
    v: TangentVector,
    op: &dyn HessianOperator,
    cfg: &SolverConfig,
    context: &str,
) -> Result<TangentVector> {
    let model = CubicModel::new(m, x.clone(), v, op, cfg.sigma)?;
    let basis = m.tangent_basis(x);
    let sol = if cfg.delta == 0.0 {
        solve_exact(&model, &basis)
    } else {
        solve_inexact(&model, &basis, cfg.delta)
    }
    .map_err(|e| Error::SubproblemFailure(format!("{context}: {e}")))?;
    Ok(sol.h)
}

/// Run R-SVRC for S epochs of T inner iterations from x0.
pub fn rsvrc_run(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x0: &Point,
    cfg: &SolverConfig,
    mut on_snapshot: Option<&mut dyn FnMut(&Snapshot)>,
) -> Result<RunOutput> {
    cfg.validate(obj.n_components())?;
    m.check_point(x0)?;
    let n = obj.n_components();
    let counter = SoCounter::new();
    let start = Instant::now();
    let l_h = cfg.l_h();

    let mut batch_rng = stream_rng(cfg.seed, cfg.replicate, Stream::Batch);
    let mut probe_rng = stream_rng(cfg.seed, cfg.replicate, Stream::Probe);
    let mut out_rng = stream_rng(cfg.seed, cfg.replicate, Stream::Output);
    let out_epoch = out_rng.gen_range(1..=cfg.epochs);
    let out_inner = out_rng.gen_range(1..=cfg.epoch_len);

    let mut records = Vec::new();
    let mut emit = |s: Snapshot, records: &mut Vec<Snapshot>| {
        if let Some(cb) = on_snapshot.as_deref_mut() {
            cb(&s);
        }
        records.push(s);
    };

    let mut x_hat = x0.clone();
    let mut x_uniform = x0.clone();
    let total = cfg.epochs * cfg.epoch_len;

    let s0 = snapshot(obj, m, x0, 0, 0, &counter, start, l_h, &mut probe_rng)?;
    emit(s0, &mut records);

    let mut global_iter = 0usize;
    let mut x_t = x_hat.clone();
    for s in 1..=cfg.epochs {
        let (_, g_full, h_full) = full_so_eval(obj, m, &x_hat, &counter)?;
        let anchor = EpochAnchor {
            x_hat: x_hat.clone(),
            g_full,
            h_full,
        };
        x_t = anchor.x_hat.clone();
        for t in 0..cfg.epoch_len {
            let batch_g = sample_batch(&mut batch_rng, n, cfg.batch_grad, cfg.with_replacement);
            let batch_h = sample_batch(&mut batch_rng, n, cfg.batch_hess, cfg.with_replacement);

            let eta_hat = m.log(&anchor.x_hat, &x_t).map_err(|e| match e {
                Error::OutsideInjectivityRadius(msg) => Error::OutsideInjectivityRadius(format!(
                    "epoch {s} iteration {t}: {msg}; sigma is too small to confine the epoch"
                )),
                other => other,
            })?;
            let v = vr_gradient(obj, m, &anchor, &x_t, &eta_hat, &batch_g, &counter)?;
            let u_op = vr_hessian_operator(obj, m, &anchor, &x_t, &batch_h, &counter)?;

            let h = solve_step(m, &x_t, v, &u_op, cfg, &format!("epoch {s} iteration {t}"))?;
            x_t = m.exp(&x_t, &h)?;

            if s == out_epoch && t + 1 == out_inner {
                x_uniform = x_t.clone();
            }

            global_iter += 1;
            if global_iter % cfg.record_every == 0 || global_iter == total {
                let snap = snapshot(obj, m, &x_t, s, t + 1, &counter, start, l_h, &mut probe_rng)?;
                emit(snap, &mut records);
            }
        }
        x_hat = x_t.clone();
    }

    Ok(RunOutput {
        x_uniform,
        x_last: x_t,
        records,
        so_calls: counter.get(),
    })
}

/// Crude Riemannian cubic-regularization baseline: every iteration uses the
/// exact full gradient and Hessian (N SO calls) and the exact subsolver.
pub fn crc_run(
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    x0: &Point,
    cfg: &SolverConfig,
    mut on_snapshot: Option<&mut dyn FnMut(&Snapshot)>,
) -> Result<RunOutput> {
    cfg.validate(obj.n_components())?;
    m.check_point(x0)?;
    let counter = SoCounter::new();
    let start = Instant::now();
    let l_h = cfg.l_h();
    let mut probe_rng = stream_rng(cfg.seed, cfg.replicate, Stream::Probe);

    let mut records = Vec::new();
    let mut emit = |s: Snapshot, records: &mut Vec<Snapshot>| {
        if let Some(cb) = on_snapshot.as_deref_mut() {
            cb(&s);
        }
        records.push(s);
    };

    let total = cfg.epochs * cfg.epoch_len;
    let mut x = x0.clone();
    let s0 = snapshot(obj, m, &x, 0, 0, &counter, start, l_h, &mut probe_rng)?;
    emit(s0, &mut records);

    for it in 1..=total {
        let (_, g, h_op) = full_so_eval(obj, m, &x, &counter)?;
        let h = solve_step(m, &x, g, &h_op, cfg, &format!("CRC iteration {it}"))?;
        x = m.exp(&x, &h)?;
        if it % cfg.record_every == 0 || it == total {
            let snap = snapshot(obj, m, &x, it, 0, &counter, start, l_h, &mut probe_rng)?;
            emit(snap, &mut records);
        }
    }

    Ok(RunOutput {
        x_uniform: x.clone(),
        x_last: x,
        records,
        so_calls: counter.get(),
    })
}
