//! Experiment harness: data simulation, replicated runs with CSV output,
//! percentile aggregation, algorithm comparison, and SVG plots.
//!
//! Dataset file layout (plain text, '#'-prefixed header lines):
//!
//! ```text
//! # rsvrc dataset v1
//! # problem=<student_t|sphere_classifier> n=<N> dim=<d> nu=<ν|-> tau2=<τ²> seed=<seed>
//! # ground_truth <rows>x<cols>
//! <rows lines of comma-separated values>
//! # samples <N>x<dim(+1 label column for the classifier)>
//! <N lines of comma-separated values; classifier label (±1) is the last column>
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{certify, StationarityReport};
use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point};
use crate::linalg::expm_sym;
use crate::objectives::FiniteSumObjective;
use crate::objectives::{SphereClassifierObjective, StudentTObjective};
use crate::optimizer::{crc_run, rsvrc_run, RunOutput, Snapshot, SolverConfig};
use crate::rng::{stream_rng, Stream};
use crate::spd::SpdManifold;
use crate::sphere::SphereManifold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    StudentT,
    SphereClassifier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rsvrc,
    Crc,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub problem: Problem,
    /// N×dim sample matrix (rows are aᵢ).
    pub samples: DMatrix<f64>,
    /// ±1 labels; classifier only.
    pub labels: Option<Vec<f64>>,
    /// Σ_true (p×p) or x_true (d×1).
    pub ground_truth: DMatrix<f64>,
    pub nu: Option<f64>,
    pub tau2: f64,
    pub seed: u64,
}

/// Σ_true = A Aᵀ + 0.1 I with A standard normal; samples
/// aᵢ = zᵢ/√(wᵢ/ν) + εᵢ, zᵢ ∼ N(0, Σ_true), wᵢ ∼ χ²_ν, εᵢ ∼ N(0, τ²I).
pub fn simulate_student_t(p: usize, n: usize, nu: f64, tau2: f64, seed: u64) -> Result<Dataset> {
    if p < 1 || n < 1 || nu < 1.0 || tau2 < 0.0 {
        return Err(Error::InvalidConfig(
            "simulate_student_t needs p >= 1, N >= 1, nu >= 1, tau2 >= 0".into(),
        ));
    }
    let mut rng = stream_rng(seed, 0, Stream::Data);
    let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma_true = &a * a.transpose() + DMatrix::identity(p, p) * 0.1;
    let chol = sigma_true
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("simulated scale matrix".into()))?;
    let l = chol.l();
    let chi = ChiSquared::new(nu).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let tau = tau2.sqrt();
    let mut samples = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = &l * DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w: f64 = chi.sample(&mut rng);
        let scale = 1.0 / (w / nu).sqrt();
        for j in 0..p {
            let eps: f64 = rng.sample::<f64, _>(StandardNormal);
            samples[(i, j)] = z[j] * scale + tau * eps;
        }
    }
    Ok(Dataset {
        problem: Problem::StudentT,
        samples,
        labels: None,
        ground_truth: sigma_true,
        nu: Some(nu),
        tau2,
        seed,
    })
}

/// x_true ∼ N(0, I) normalized; features uniform on [−4,4]^d; label +1 iff
/// x_trueᵀaᵢ + εᵢ ≥ 0 with εᵢ ∼ N(0, τ²) (ties go to +1). The feature range
/// puts a useful share of margins into the saturated tails of the sigmoid
/// loss, so second-order methods need several global steps rather than
/// converging in one or two Newton iterations.
pub fn simulate_classifier(d: usize, n: usize, tau2: f64, seed: u64) -> Result<Dataset> {
    if d < 2 || n < 1 || tau2 < 0.0 {
        return Err(Error::InvalidConfig(
            "simulate_classifier needs d >= 2, N >= 1, tau2 >= 0".into(),
        ));
    }
    let mut rng = stream_rng(seed, 0, Stream::Data);
    let mut x_true = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    x_true /= x_true.norm();
    let tau = tau2.sqrt();
    let mut samples = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..d {
            samples[(i, j)] = rng.gen_range(-4.0..=4.0);
            s += x_true[j] * samples[(i, j)];
        }
        let eps: f64 = rng.sample::<f64, _>(StandardNormal);
        labels.push(if s + tau * eps >= 0.0 { 1.0 } else { -1.0 });
    }
    Ok(Dataset {
        problem: Problem::SphereClassifier,
        samples,
        labels: Some(labels),
        ground_truth: DMatrix::from_column_slice(d, 1, x_true.as_slice()),
        nu: None,
        tau2,
        seed,
    })
}

fn fmt_f64(x: f64) -> String {
    // shortest round-trip representation keeps files diffable and loadable
    format!("{x}")
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# rsvrc dataset v1\n");
    let problem = match ds.problem {
        Problem::StudentT => "student_t",
        Problem::SphereClassifier => "sphere_classifier",
    };
    let nu = ds.nu.map(|v| fmt_f64(v)).unwrap_or_else(|| "-".into());
    out.push_str(&format!(
        "# problem={problem} n={} dim={} nu={nu} tau2={} seed={}\n",
        ds.samples.nrows(),
        ds.samples.ncols(),
        fmt_f64(ds.tau2),
        ds.seed
    ));
    out.push_str(&format!(
        "# ground_truth {}x{}\n",
        ds.ground_truth.nrows(),
        ds.ground_truth.ncols()
    ));
    for i in 0..ds.ground_truth.nrows() {
        let row: Vec<String> = (0..ds.ground_truth.ncols())
            .map(|j| fmt_f64(ds.ground_truth[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let extra = usize::from(ds.labels.is_some());
    out.push_str(&format!(
        "# samples {}x{}\n",
        ds.samples.nrows(),
        ds.samples.ncols() + extra
    ));
    for i in 0..ds.samples.nrows() {
        let mut row: Vec<String> = (0..ds.samples.ncols())
            .map(|j| fmt_f64(ds.samples[(i, j)]))
            .collect();
        if let Some(labels) = &ds.labels {
            row.push(fmt_f64(labels[i]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(Error::Io)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text =
        fs::read_to_string(path).map_err(Error::Io)?;
    let mut lines = text.lines();
    let bad =
        |msg: &str| Error::InvalidConfig(format!("{}: malformed dataset file ({msg})", path.display()));
    if lines.next() != Some("# rsvrc dataset v1") {
        return Err(bad("missing magic line"));
    }
    let meta = lines.next().ok_or_else(|| bad("missing metadata"))?;
    let mut problem = None;
    let mut n = 0usize;
    let mut dim = 0usize;
    let mut nu = None;
    let mut tau2 = 0.0;
    let mut seed = 0u64;
    for tok in meta.trim_start_matches('#').split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad("bad metadata token"))?;
        match k {
            "problem" => {
                problem = Some(match v {
                    "student_t" => Problem::StudentT,
                    "sphere_classifier" => Problem::SphereClassifier,
                    _ => return Err(bad("unknown problem")),
                })
            }
            "n" => n = v.parse().map_err(|_| bad("n"))?,
            "dim" => dim = v.parse().map_err(|_| bad("dim"))?,
            "nu" => nu = if v == "-" { None } else { Some(v.parse().map_err(|_| bad("nu"))?) },
            "tau2" => tau2 = v.parse().map_err(|_| bad("tau2"))?,
            "seed" => seed = v.parse().map_err(|_| bad("seed"))?,
            _ => {}
        }
    }
    let problem = problem.ok_or_else(|| bad("missing problem"))?;

    let gt_header = lines.next().ok_or_else(|| bad("missing ground_truth header"))?;
    let (gr, gc) = parse_shape(gt_header, "# ground_truth").ok_or_else(|| bad("ground_truth header"))?;
    let mut ground_truth = DMatrix::zeros(gr, gc);
    for i in 0..gr {
        let row = lines.next().ok_or_else(|| bad("short ground_truth"))?;
        parse_row(row, gc, |j, v| ground_truth[(i, j)] = v).map_err(|_| bad("ground_truth row"))?;
    }

    let s_header = lines.next().ok_or_else(|| bad("missing samples header"))?;
    let (sr, sc) = parse_shape(s_header, "# samples").ok_or_else(|| bad("samples header"))?;
    if sr != n {
        return Err(bad("sample count mismatch"));
    }
    let has_labels = problem == Problem::SphereClassifier;
    if sc != dim + usize::from(has_labels) {
        return Err(bad("sample width mismatch"));
    }
    let mut samples = DMatrix::zeros(n, dim);
    let mut labels = if has_labels { Some(Vec::with_capacity(n)) } else { None };
    for i in 0..n {
        let row = lines.next().ok_or_else(|| bad("short samples"))?;
        let mut label = 0.0;
        parse_row(row, sc, |j, v| {
            if j < dim {
                samples[(i, j)] = v;
            } else {
                label = v;
            }
        })
        .map_err(|_| bad("sample row"))?;
        if let Some(l) = labels.as_mut() {
            l.push(label);
        }
    }
    Ok(Dataset {
        problem,
        samples,
        labels,
        ground_truth,
        nu,
        tau2,
        seed,
    })
}

fn parse_shape(line: &str, prefix: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix(prefix)?.trim();
    let (r, c) = rest.split_once('x')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

fn parse_row(line: &str, width: usize, mut set: impl FnMut(usize, f64)) -> std::result::Result<(), ()> {
    let mut count = 0;
    for (j, tok) in line.split(',').enumerate() {
        if j >= width {
            return Err(());
        }
        set(j, tok.parse().map_err(|_| ())?);
        count += 1;
    }
    if count == width {
        Ok(())
    } else {
        Err(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataParams {
    /// p (SPD side) or d (sphere ambient dimension).
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_nu")]
    pub nu: f64,
    pub tau2: f64,
}

fn default_nu() -> f64 {
    3.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub algorithm: Algorithm,
    pub data: DataParams,
    pub solver: SolverConfig,
    pub replicates: usize,
    pub out_dir: PathBuf,
    /// Randomize x₀ per replicate instead of the deterministic default
    /// (identity matrix on SPD, normalized all-ones on the sphere).
    #[serde(default)]
    pub random_init: bool,
    /// Record wall-clock seconds in the CSVs. Off by default so output files
    /// are bitwise-reproducible; the seconds column is then written as 0.
    #[serde(default)]
    pub wall_clock: bool,
    /// ε for the final stationarity certificate.
    #[serde(default = "default_certify_epsilon")]
    pub certify_epsilon: f64,
}

fn default_certify_epsilon() -> f64 {
    1e-4
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        self.solver.validate(self.data.n)
    }
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match cfg.problem {
        Problem::StudentT => simulate_student_t(
            cfg.data.dim,
            cfg.data.n,
            cfg.data.nu,
            cfg.data.tau2,
            cfg.solver.seed,
        ),
        Problem::SphereClassifier => {
            simulate_classifier(cfg.data.dim, cfg.data.n, cfg.data.tau2, cfg.solver.seed)
        }
    }
}

pub fn build_objective(ds: &Dataset) -> Result<Box<dyn FiniteSumObjective>> {
    match ds.problem {
        Problem::StudentT => Ok(Box::new(StudentTObjective::new(
            ds.samples.clone(),
            ds.nu.ok_or_else(|| Error::InvalidConfig("student_t dataset missing nu".into()))?,
        ))),
        Problem::SphereClassifier => Ok(Box::new(SphereClassifierObjective::new(
            ds.samples.clone(),
            ds.labels
                .clone()
                .ok_or_else(|| Error::InvalidConfig("classifier dataset missing labels".into()))?,
        ))),
    }
}

pub fn build_manifold(problem: Problem, dim: usize) -> Box<dyn Manifold> {
    match problem {
        Problem::StudentT => Box::new(SpdManifold::new(dim)),
        Problem::SphereClassifier => Box::new(SphereManifold::new(dim)),
    }
}

pub fn initial_point(
    m: &dyn Manifold,
    problem: Problem,
    random_init: bool,
    seed: u64,
    replicate: u64,
) -> Result<Point> {
    let (rows, cols) = m.ambient_shape();
    let x0 = match problem {
        Problem::StudentT => Point::new(DMatrix::identity(rows, cols)),
        Problem::SphereClassifier => {
            let v = DVector::from_element(rows, 1.0 / (rows as f64).sqrt());
            Point::new(DMatrix::from_column_slice(rows, 1, v.as_slice()))
        }
    };
    if !random_init {
        return Ok(x0);
    }
    let mut rng = stream_rng(seed, replicate, Stream::Init);
    match problem {
        Problem::SphereClassifier => {
            let mut v = DVector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
            v /= v.norm();
            Ok(Point::new(DMatrix::from_column_slice(rows, 1, v.as_slice())))
        }
        Problem::StudentT => {
            let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = (&g + g.transpose()) * 0.1;
            Ok(Point::new(expm_sym(&s)))
        }
    }
}

/// One replicate's results.
pub struct ReplicateResult {
    pub replicate: u64,
    pub outcome: std::result::Result<RunOutput, String>,
    pub stationarity: Option<StationarityReport>,
}

pub struct ExperimentResult {
    pub replicates: Vec<ReplicateResult>,
    pub files: Vec<PathBuf>,
}

const CSV_HEADER: &str = "s,t,so_calls,seconds,f,grad_norm,lambda_min,mu";

fn snapshot_csv_line(s: &Snapshot, wall_clock: bool) -> String {
    let seconds = if wall_clock { s.seconds } else { 0.0 };
    format!(
        "{},{},{},{seconds:.6},{},{},{},{}",
        s.epoch,
        s.inner,
        s.so_calls,
        fmt_f64(s.f),
        fmt_f64(s.grad_norm),
        fmt_f64(s.lambda_min),
        fmt_f64(s.mu)
    )
}

fn run_one(
    cfg: &ExperimentConfig,
    obj: &dyn FiniteSumObjective,
    m: &dyn Manifold,
    replicate: u64,
) -> ReplicateResult {
    let mut solver = cfg.solver.clone();
    solver.replicate = replicate;
    let run = initial_point(m, cfg.problem, cfg.random_init, solver.seed, replicate).and_then(
        |x0| match cfg.algorithm {
            Algorithm::Rsvrc => rsvrc_run(obj, m, &x0, &solver, None),
            Algorithm::Crc => crc_run(obj, m, &x0, &solver, None),
        },
    );
    match run {
        Ok(out) => {
            let mut probe = stream_rng(solver.seed, replicate, Stream::Probe);
            let stationarity = certify(
                obj,
                m,
                &out.x_last,
                cfg.certify_epsilon,
                solver.l_h(),
                &mut probe,
            )
            .ok();
            ReplicateResult {
                replicate,
                outcome: Ok(out),
                stationarity,
            }
        }
        Err(e) => ReplicateResult {
            replicate,
            outcome: Err(e.to_string()),
            stationarity: None,
        },
    }
}

/// Percentile with linear interpolation on the sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn five_numbers(values: &mut Vec<f64>) -> [f64; 5] {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [
        values[0],
        percentile(values, 0.25),
        percentile(values, 0.5),
        percentile(values, 0.75),
        values[values.len() - 1],
    ]
}

/// Runs `replicates` independent runs (parallel, deterministic seeds), writes
/// rep_XX.csv per replicate, aggregate.csv (five-number summaries per
/// snapshot), stationarity.csv, and summary.txt (SO calls to gradient-norm
/// thresholds 1e-2/1e-3/1e-4).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)
        .map_err(Error::Io)?;
    let ds = build_dataset(cfg)?;
    let obj = build_objective(&ds)?;
    let m = build_manifold(cfg.problem, cfg.data.dim);

    let mut replicates: Vec<ReplicateResult> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| run_one(cfg, obj.as_ref(), m.as_ref(), r))
        .collect();
    replicates.sort_by_key(|r| r.replicate);

    let mut files = Vec::new();

    for rep in &replicates {
        let path = cfg.out_dir.join(format!("rep_{:02}.csv", rep.replicate));
        let mut body = String::from(CSV_HEADER);
        body.push('\n');
        match &rep.outcome {
            Ok(out) => {
                for s in &out.records {
                    body.push_str(&snapshot_csv_line(s, cfg.wall_clock));
                    body.push('\n');
                }
            }
            Err(msg) => {
                body.push_str(&format!("# solver failure: {msg}\n"));
            }
        }
        fs::write(&path, body).map_err(Error::Io)?;
        files.push(path);
    }

    // aggregate across replicates that produced the full snapshot sequence
    let ok_runs: Vec<&RunOutput> = replicates
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let agg_path = cfg.out_dir.join("aggregate.csv");
    let mut agg = String::from(
        "s,t,so_calls,\
         f_min,f_p25,f_median,f_p75,f_max,\
         grad_norm_min,grad_norm_p25,grad_norm_median,grad_norm_p75,grad_norm_max,\
         lambda_min_min,lambda_min_p25,lambda_min_median,lambda_min_p75,lambda_min_max,\
         mu_min,mu_p25,mu_median,mu_p75,mu_max\n",
    );
    if let Some(first) = ok_runs.first() {
        let n_snap = first.records.len();
        if ok_runs.iter().all(|r| r.records.len() == n_snap) {
            for i in 0..n_snap {
                let lead = &first.records[i];
                let mut row = format!("{},{},{}", lead.epoch, lead.inner, lead.so_calls);
                for pick in [
                    |s: &Snapshot| s.f,
                    |s: &Snapshot| s.grad_norm,
                    |s: &Snapshot| s.lambda_min,
                    |s: &Snapshot| s.mu,
                ] {
                    let mut vals: Vec<f64> = ok_runs.iter().map(|r| pick(&r.records[i])).collect();
                    for v in five_numbers(&mut vals) {
                        row.push(',');
                        row.push_str(&fmt_f64(v));
                    }
                }
                agg.push_str(&row);
                agg.push('\n');
            }
        }
    }
    fs::write(&agg_path, agg).map_err(Error::Io)?;
    files.push(agg_path);

    let st_path = cfg.out_dir.join("stationarity.csv");
    let mut st = String::from("replicate,status,grad_norm,lambda_min,epsilon_equivalent,passed\n");
    for rep in &replicates {
        match (&rep.outcome, &rep.stationarity) {
            (Ok(_), Some(r)) => st.push_str(&format!(
                "{},ok,{},{},{},{}\n",
                rep.replicate,
                fmt_f64(r.grad_norm),
                fmt_f64(r.lambda_min),
                fmt_f64(r.epsilon_equivalent),
                r.passed
            )),
            (Ok(_), None) => st.push_str(&format!("{},certify_failed,,,,\n", rep.replicate)),
            (Err(msg), _) => st.push_str(&format!(
                "{},\"solver failure: {}\",,,,\n",
                rep.replicate,
                msg.replace('"', "\"\"")
            )),
        }
    }
    fs::write(&st_path, st).map_err(Error::Io)?;
    files.push(st_path);

    let summary_path = cfg.out_dir.join("summary.txt");
    let mut summary = String::new();
    summary.push_str(&format!(
        "replicates: {} ({} succeeded)\n",
        replicates.len(),
        ok_runs.len()
    ));
    for thr in [1e-2, 1e-3, 1e-4] {
        let mut so: Vec<f64> = Vec::new();
        let mut secs: Vec<f64> = Vec::new();
        for run in &ok_runs {
            if let Some(s) = run.records.iter().find(|s| s.grad_norm <= thr) {
                so.push(s.so_calls as f64);
                secs.push(s.seconds);
            }
        }
        if so.is_empty() {
            summary.push_str(&format!("grad_norm <= {thr:e}: not reached\n"));
        } else {
            let med_so = percentile(
                &{
                    let mut v = so.clone();
                    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    v
                },
                0.5,
            );
            let time_note = if cfg.wall_clock {
                let mut v = secs.clone();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                format!(", median seconds {:.3}", percentile(&v, 0.5))
            } else {
                String::new()
            };
            summary.push_str(&format!(
                "grad_norm <= {thr:e}: reached in {}/{} replicates, median SO calls {med_so}{time_note}\n",
                so.len(),
                ok_runs.len()
            ));
        }
    }
    fs::write(&summary_path, summary)
        .map_err(Error::Io)?;
    files.push(summary_path);

    Ok(ExperimentResult { replicates, files })
}

/// Runs both algorithms on the same dataset and writes an aligned
/// metric-vs-SO-calls table (per-snapshot medians across replicates).
pub fn compare_algorithms(
    cfg_rsvrc: &ExperimentConfig,
    cfg_crc: &ExperimentConfig,
    out_path: &Path,
) -> Result<()> {
    if cfg_rsvrc.algorithm != Algorithm::Rsvrc || cfg_crc.algorithm != Algorithm::Crc {
        return Err(Error::ContractViolation(
            "compare_algorithms expects one rsvrc config and one crc config".into(),
        ));
    }
    if cfg_rsvrc.problem != cfg_crc.problem
        || cfg_rsvrc.solver.seed != cfg_crc.solver.seed
        || cfg_rsvrc.data.dim != cfg_crc.data.dim
        || cfg_rsvrc.data.n != cfg_crc.data.n
        || cfg_rsvrc.data.nu != cfg_crc.data.nu
        || cfg_rsvrc.data.tau2 != cfg_crc.data.tau2
    {
        return Err(Error::ContractViolation(
            "compare_algorithms requires identical problem, data parameters, and seed".into(),
        ));
    }
    let res_a = run_experiment(cfg_rsvrc)?;
    let res_b = run_experiment(cfg_crc)?;

    let mut out = String::from(
        "algorithm,snapshot,so_calls,seconds_median,f_median,grad_norm_median,lambda_min_median,mu_median\n",
    );
    for (name, res, wall) in [
        ("rsvrc", &res_a, cfg_rsvrc.wall_clock),
        ("crc", &res_b, cfg_crc.wall_clock),
    ] {
        let ok: Vec<&RunOutput> = res
            .replicates
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        let Some(first) = ok.first() else { continue };
        let n_snap = first.records.len();
        if !ok.iter().all(|r| r.records.len() == n_snap) {
            continue;
        }
        for i in 0..n_snap {
            let med = |pick: fn(&Snapshot) -> f64| {
                let mut v: Vec<f64> = ok.iter().map(|r| pick(&r.records[i])).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                percentile(&v, 0.5)
            };
            let seconds = if wall { med(|s| s.seconds) } else { 0.0 };
            out.push_str(&format!(
                "{name},{i},{},{seconds:.6},{},{},{},{}\n",
                first.records[i].so_calls,
                fmt_f64(med(|s| s.f)),
                fmt_f64(med(|s| s.grad_norm)),
                fmt_f64(med(|s| s.lambda_min)),
                fmt_f64(med(|s| s.mu)),
            ));
        }
    }
    fs::write(out_path, out).map_err(Error::Io)
}

/// Log-scale SVG plot of a metric's median with the interquartile band,
/// x-axis in SO calls. `metric` must be one of f, grad_norm, lambda_min, mu.
/// Values ≤ 0 are clamped to 1e-16 before the log transform.
pub fn emit_svg_plot(aggregate_csv: &Path, metric: &str, out_path: &Path) -> Result<()> {
    let text = fs::read_to_string(aggregate_csv)
        .map_err(Error::Io)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("empty aggregate file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: String| cols.iter().position(|c| **c == name);
    let (i_p25, i_med, i_p75) = match (
        find(format!("{metric}_p25")),
        find(format!("{metric}_median")),
        find(format!("{metric}_p75")),
    ) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown metric '{metric}'; expected one of f, grad_norm, lambda_min, mu"
            )))
        }
    };
    let i_so = find("so_calls".into())
        .ok_or_else(|| Error::InvalidConfig("aggregate file missing so_calls".into()))?;

    let mut xs = Vec::new();
    let mut p25 = Vec::new();
    let mut med = Vec::new();
    let mut p75 = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidConfig("bad aggregate row".into()))
        };
        xs.push(get(i_so)?);
        p25.push(log_clamp(get(i_p25)?));
        med.push(log_clamp(get(i_med)?));
        p75.push(log_clamp(get(i_p75)?));
    }
    if xs.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "metric column '{metric}' is empty"
        )));
    }

    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 20.0;
    const MB: f64 = 50.0;
    let x_min = xs[0];
    let x_max = xs[xs.len() - 1].max(x_min + 1.0);
    let y_min = p25.iter().chain(med.iter()).cloned().fold(f64::MAX, f64::min);
    let y_max = p75
        .iter()
        .chain(med.iter())
        .cloned()
        .fold(f64::MIN, f64::max)
        .max(y_min + 1e-9);
    let sx = |x: f64| ML + (x - x_min) / (x_max - x_min) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y_min) / (y_max - y_min) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // IQR band
    let mut band = String::from("<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" points=\"");
    for (x, y) in xs.iter().zip(p75.iter()) {
        band.push_str(&format!("{:.2},{:.2} ", sx(*x), sy(*y)));
    }
    for (x, y) in xs.iter().zip(p25.iter()).rev() {
        band.push_str(&format!("{:.2},{:.2} ", sx(*x), sy(*y)));
    }
    band.push_str("\"/>\n");
    svg.push_str(&band);

    let mut line = String::from(
        "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"",
    );
    for (x, y) in xs.iter().zip(med.iter()) {
        line.push_str(&format!("{:.2},{:.2} ", sx(*x), sy(*y)));
    }
    line.push_str("\"/>\n");
    svg.push_str(&line);

    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">SO calls</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">log10({metric})</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));
    for frac in [0.0, 0.5, 1.0] {
        let xv = x_min + frac * (x_max - x_min);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.0}</text>\n",
            sx(xv),
            H - MB + 16.0,
            xv
        ));
        let yv = y_min + frac * (y_max - y_min);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{:.2}</text>\n",
            ML - 6.0,
            sy(yv) + 4.0,
            yv
        ));
    }
    svg.push_str("</svg>\n");

    let mut file =
        fs::File::create(out_path).map_err(Error::Io)?;
    file.write_all(svg.as_bytes())
        .map_err(Error::Io)
}

fn log_clamp(v: f64) -> f64 {
    v.max(1e-16).log10()
}
