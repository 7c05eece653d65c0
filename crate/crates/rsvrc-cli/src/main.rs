//! Command-line front end: simulate datasets, run replicated experiments,
//! compare algorithms, plot aggregates, and run the diagnostics suite.
//!
//! Exit codes: 0 success, 1 usage error, 2 solver failure, 3 invariant
//! violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rsvrc::harness::{
    build_manifold, build_objective, compare_algorithms, emit_svg_plot, initial_point,
    run_experiment, save_dataset, simulate_classifier, simulate_student_t, Algorithm, DataParams,
    ExperimentConfig, Problem,
};
use rsvrc::diagnostics::{certify, fd_gradient_check, fd_hessian_check};
use rsvrc::optimizer::{sigma_lower_bound_check, SolverConfig};
use rsvrc::rng::{stream_rng, Stream};
use rsvrc::Error;

#[derive(Parser)]
#[command(name = "rsvrc", about = "Riemannian stochastic variance-reduced cubic regularization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    StudentT,
    SphereClassifier,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::StudentT => Problem::StudentT,
            ProblemArg::SphereClassifier => Problem::SphereClassifier,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    Rsvrc,
    Crc,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Rsvrc => Algorithm::Rsvrc,
            AlgorithmArg::Crc => Algorithm::Crc,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    problem: ProblemArg,
    /// p for student-t (SPD side), d for the sphere classifier.
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3.0)]
    nu: f64,
    #[arg(long)]
    tau2: f64,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    epoch_len: usize,
    #[arg(long)]
    batch_grad: usize,
    #[arg(long)]
    batch_hess: usize,
    /// Subproblem inexactness; 0 selects the exact subsolver.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Sample batches without replacement.
    #[arg(long)]
    without_replacement: bool,
}

impl SolverArgs {
    fn to_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            sigma: self.sigma,
            epochs: self.epochs,
            epoch_len: self.epoch_len,
            batch_grad: self.batch_grad,
            batch_hess: self.batch_hess,
            delta: self.delta,
            seed,
            replicate: 0,
            with_replacement: !self.without_replacement,
            record_every: self.record_every,
            l_h_estimate: None,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a dataset and write it to a file.
    Simulate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replicated experiment; writes per-replicate CSVs, aggregate.csv,
    /// stationarity.csv, and summary.txt into --out-dir.
    Run {
        /// TOML config whose keys mirror the experiment fields; command-line
        /// flags are ignored when this is given (except the required three).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        replicates: usize,
        #[command(flatten)]
        data: Option<DataArgs>,
        #[command(flatten)]
        solver: Option<SolverArgs>,
        #[arg(long, value_enum, default_value = "rsvrc")]
        algorithm: AlgorithmArg,
        #[arg(long)]
        random_init: bool,
        /// Record wall-clock seconds in the CSVs (breaks bitwise
        /// reproducibility of output files).
        #[arg(long)]
        wall_clock: bool,
    },
    /// Run R-SVRC and CRC on the same dataset and write a comparison CSV.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
    /// Plot a metric from an aggregate.csv as an SVG.
    Plot {
        #[arg(long)]
        aggregate: PathBuf,
        /// One of: f, grad_norm, lambda_min, mu.
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the diagnostics suite (finite-difference checks, sigma bound,
    /// stationarity certificate at the default initial point).
    Check {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::SubproblemFailure(_) | Error::LanczosFailure(_)) => 2,
                Some(Error::ContractViolation(_)) => 3,
                Some(Error::InvalidConfig(_)) | None => 1,
                Some(_) => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Simulate { data, seed, out } => {
            let ds = match Problem::from(data.problem) {
                Problem::StudentT => {
                    simulate_student_t(data.dim, data.n, data.nu, data.tau2, seed)?
                }
                Problem::SphereClassifier => {
                    simulate_classifier(data.dim, data.n, data.tau2, seed)?
                }
            };
            save_dataset(&ds, &out)?;
            println!("wrote {} ({} samples)", out.display(), ds.samples.nrows());
            Ok(())
        }
        Cmd::Run {
            config,
            seed,
            out_dir,
            replicates,
            data,
            solver,
            algorithm,
            random_init,
            wall_clock,
        } => {
            let cfg = if let Some(path) = config {
                let text = std::fs::read_to_string(&path)?;
                let mut cfg: ExperimentConfig = toml::from_str(&text)?;
                cfg.solver.seed = seed;
                cfg.out_dir = out_dir;
                cfg.replicates = replicates;
                cfg
            } else {
                let data = data.ok_or_else(|| {
                    anyhow::Error::from(Error::InvalidConfig(
                        "run needs either --config or the data/solver flags".into(),
                    ))
                })?;
                let solver = solver.ok_or_else(|| {
                    anyhow::Error::from(Error::InvalidConfig(
                        "run needs either --config or the data/solver flags".into(),
                    ))
                })?;
                ExperimentConfig {
                    problem: data.problem.into(),
                    algorithm: algorithm.into(),
                    data: DataParams {
                        dim: data.dim,
                        n: data.n,
                        nu: data.nu,
                        tau2: data.tau2,
                    },
                    solver: solver.to_config(seed),
                    replicates,
                    out_dir,
                    random_init,
                    wall_clock,
                    certify_epsilon: 1e-4,
                }
            };
            let result = run_experiment(&cfg)?;
            let failures: Vec<&_> = result
                .replicates
                .iter()
                .filter(|r| r.outcome.is_err())
                .collect();
            for f in &result.files {
                println!("wrote {}", f.display());
            }
            if !failures.is_empty() {
                return Err(Error::SubproblemFailure(format!(
                    "{} of {} replicates failed; see stationarity.csv",
                    failures.len(),
                    result.replicates.len()
                ))
                .into());
            }
            Ok(())
        }
        Cmd::Compare {
            data,
            solver,
            seed,
            out_dir,
            replicates,
        } => {
            let base = ExperimentConfig {
                problem: data.problem.into(),
                algorithm: Algorithm::Rsvrc,
                data: DataParams {
                    dim: data.dim,
                    n: data.n,
                    nu: data.nu,
                    tau2: data.tau2,
                },
                solver: solver.to_config(seed),
                replicates,
                out_dir: out_dir.join("rsvrc"),
                random_init: false,
                wall_clock: false,
                certify_epsilon: 1e-4,
            };
            let mut crc = base.clone();
            crc.algorithm = Algorithm::Crc;
            crc.out_dir = out_dir.join("crc");
            let out = out_dir.join("comparison.csv");
            std::fs::create_dir_all(&out_dir)?;
            compare_algorithms(&base, &crc, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Plot {
            aggregate,
            metric,
            out,
        } => {
            emit_svg_plot(&aggregate, &metric, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Check { data, seed, sigma } => {
            let problem = Problem::from(data.problem);
            let ds = match problem {
                Problem::StudentT => {
                    simulate_student_t(data.dim, data.n, data.nu, data.tau2, seed)?
                }
                Problem::SphereClassifier => {
                    simulate_classifier(data.dim, data.n, data.tau2, seed)?
                }
            };
            let obj = build_objective(&ds)?;
            let m = build_manifold(problem, data.dim);
            let x0 = initial_point(m.as_ref(), problem, false, seed, 0)?;
            let mut rng = stream_rng(seed, 0, Stream::Probe);

            let g_err = fd_gradient_check(obj.as_ref(), m.as_ref(), &x0, 20, 1e-5, &mut rng)?;
            let h_err = fd_hessian_check(obj.as_ref(), m.as_ref(), &x0, 20, 1e-4, &mut rng)?;
            println!("fd gradient check: max relative error {g_err:.3e} (tolerance 1e-5)");
            println!("fd hessian  check: max relative error {h_err:.3e} (tolerance 1e-4)");

            let cfg = SolverConfig {
                sigma,
                epochs: 1,
                epoch_len: 5,
                batch_grad: 1,
                batch_hess: 1,
                delta: 0.0,
                seed,
                replicate: 0,
                with_replacement: true,
                record_every: 1,
                l_h_estimate: None,
            };
            let bound = sigma_lower_bound_check(&cfg, m.as_ref(), 1.0, 1.0);
            if bound.applicable {
                println!(
                    "sigma lower bound (c_g=c_H=1, T=5): threshold {:.4}, sigma {} -> {}",
                    bound.threshold,
                    sigma,
                    if bound.passes == Some(true) { "ok" } else { "below bound (advisory)" }
                );
            } else {
                println!("sigma lower bound: not applicable (infinite injectivity radius)");
            }

            let report = certify(obj.as_ref(), m.as_ref(), &x0, 1e-4, sigma / 2.0, &mut rng)?;
            println!(
                "stationarity at x0: grad_norm {:.3e}, lambda_min {:.3e}, certified: {}",
                report.grad_norm, report.lambda_min, report.passed
            );
            if g_err > 1e-5 || h_err > 1e-4 {
                return Err(Error::ContractViolation(
                    "finite-difference check exceeded tolerance".into(),
                )
                .into());
            }
            Ok(())
        }
    }
}
