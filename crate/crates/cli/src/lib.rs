//! Command implementations behind the `delayres` binary.

mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use delayres_core::bench::{self, ExperimentConfig, InputSpec, Seeds};
use delayres_core::dde::{integrate_with, InitialCondition, IntegratorOptions, Trajectory};
use delayres_core::error::ErrorClass;
use delayres_core::separation::{delta_k, fourier_coeffs, TrigPolynomial};
use delayres_core::signal::{ConstantSignal, Signal};
use delayres_core::spectral::spectral_abscissa_scalar;
use delayres_core::stability::{iss_epsilon_critical, verify_dissipation, LkfConfig};
use serde::Serialize;

pub use output::{fmt_f64, Artifact, RunManifest};
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "delayres", version, about = "Time-delay reservoir experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Replaces the configured seeds by ones derived from this integer.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the reservoir and write trajectory.csv.
    Simulate(CommonArgs),
    /// Run the NARMA10 benchmark; writes report.json and predictions.csv.
    Benchmark(CommonArgs),
    /// Spectral, separation and stability analysis of a linear reservoir.
    Analyze(CommonArgs),
    /// Benchmark every cell of the configured sweep grid.
    Sweep(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Benchmark(_) => "benchmark",
            Command::Analyze(_) => "analyze",
            Command::Sweep(_) => "sweep",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) | Command::Benchmark(a) | Command::Analyze(a) | Command::Sweep(a) => a,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Core(#[from] delayres_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Configuration => 2,
                ErrorClass::Numerical => 3,
            },
            CliError::Io { .. } => 4,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(command: &Command) -> Result<RunManifest, CliError> {
    let args = command.args();
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = Seeds::derived(seed);
    }
    let mut out = OutputDir::create(&args.out)?;
    match command {
        Command::Simulate(_) => simulate(&cfg, &mut out)?,
        Command::Benchmark(_) => benchmark(&cfg, &mut out)?,
        Command::Analyze(_) => analyze(&cfg, &mut out)?,
        Command::Sweep(_) => sweep(&cfg, &mut out)?,
    }
    out.finish(command.name(), &args.config)
}

fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    (0..traj.len())
        .map(|i| {
            std::iter::once(fmt_f64(traj.time(i)))
                .chain(traj.state(i).iter().map(|v| fmt_f64(*v)))
                .collect()
        })
        .collect()
}

fn simulate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let dynamics = cfg.dynamics.build()?;
    let dt = cfg.clock.step(cfg.dynamics.tau)?;
    let init = InitialCondition::scalar(cfg.analysis.phi);
    let opts = IntegratorOptions {
        seed: cfg.seeds.noise,
        noise_cutoff: None,
    };
    let traj = match &cfg.analysis.input {
        InputSpec::Constant { value } => {
            integrate_with(&dynamics, &init, &ConstantSignal(*value), cfg.analysis.t_end, dt, &opts)?
        }
        InputSpec::Cosine { period, amplitude } => integrate_with(
            &dynamics,
            &init,
            &TrigPolynomial::cosine(*period, *amplitude),
            cfg.analysis.t_end,
            dt,
            &opts,
        )?,
        InputSpec::Reservoir => {
            let (_, drive) = bench::reservoir_drive(cfg)?;
            integrate_with(&dynamics, &init, &drive, drive.end(), dt, &opts)?
        }
    };
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..traj.dim()).map(|c| format!("x{c}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("trajectory.csv", &header, &trajectory_rows(&traj))
}

fn benchmark(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let report = bench::run_narma10(cfg)?;
    let rows: Vec<Vec<String>> = report
        .test_targets
        .iter()
        .zip(&report.test_predictions)
        .enumerate()
        .map(|(i, (y, p))| vec![i.to_string(), fmt_f64(*y), fmt_f64(*p)])
        .collect();
    out.write_json("report.json", &report)?;
    out.write_csv("predictions.csv", &["index", "y_target", "y_pred"], &rows)
}

#[derive(Serialize)]
struct RootRecord {
    re: f64,
    im: f64,
    residual: f64,
}

#[derive(Serialize)]
struct SpectrumFile {
    a0: f64,
    a1: f64,
    tau: f64,
    s0: f64,
    complex_dominant: bool,
    branch_count: usize,
    roots: Vec<RootRecord>,
}

#[derive(Serialize)]
struct StabilityFile {
    eps_star: f64,
    eps: f64,
    state_coefficient: f64,
    dissipation_violations: usize,
    worst_residual: f64,
    tolerance: f64,
    diss_check_grid: f64,
    checked_points: usize,
    gronwall_violations: usize,
    fading_rate_estimate: Option<f64>,
}

fn input_signal(spec: &InputSpec) -> Option<Box<dyn Signal>> {
    match spec {
        InputSpec::Constant { value } => Some(Box::new(ConstantSignal(*value))),
        InputSpec::Cosine { period, amplitude } => Some(Box::new(TrigPolynomial::cosine(*period, *amplitude))),
        InputSpec::Reservoir => None,
    }
}

fn analyze(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let d = &cfg.dynamics;
    if !d.is_linear() {
        return Err(delayres_core::Error::Unsupported(
            "analysis covers the linear reservoir only (nonlinearity must be identity)".into(),
        )
        .into());
    }
    let a = &cfg.analysis;
    let spectrum = spectral_abscissa_scalar(d.a0, d.a1, d.tau, a.branches)?;
    out.write_json(
        "spectrum.json",
        &SpectrumFile {
            a0: d.a0,
            a1: d.a1,
            tau: d.tau,
            s0: spectrum.s0,
            complex_dominant: spectrum.complex_dominant,
            branch_count: spectrum.branch_count,
            roots: spectrum
                .dominant_roots
                .iter()
                .zip(&spectrum.residuals)
                .map(|(z, r)| RootRecord {
                    re: z.re,
                    im: z.im,
                    residual: *r,
                })
                .collect(),
        },
    )?;

    let input = input_signal(&a.input);
    for (i, &t1) in a.t1_values.iter().enumerate() {
        let power = match &input {
            Some(w) if !matches!(a.input, InputSpec::Constant { value } if value == 0.0) => {
                Some(fourier_coeffs(w.as_ref(), t1, a.kmax, 64 * a.kmax.max(16))?.power())
            }
            _ => None,
        };
        let rows: Vec<Vec<String>> = (1..=a.kmax as i64)
            .map(|k| {
                let dk = delta_k(d.a0, &[(d.a1, d.tau)], t1, k);
                let mut row = vec![k.to_string(), fmt_f64(dk), fmt_f64(1.0 / dk)];
                if let Some(p) = &power {
                    row.push(fmt_f64(p[(k + a.kmax as i64) as usize]));
                }
                row
            })
            .collect();
        let mut header = vec!["k", "delta_k", "delta_k_inv"];
        if power.is_some() {
            header.push("alpha_k_sq");
        }
        let name = if i == 0 {
            "separation.csv".to_string()
        } else {
            format!("separation_t1_{t1}.csv")
        };
        out.write_csv(&name, &header, &rows)?;
    }

    let eps_star = iss_epsilon_critical(d.a0, d.a1)?;
    let eps = a.eps.unwrap_or(1.1 * eps_star);
    let lkf = LkfConfig::new(d.a0, d.a1, d.tau)?;
    let dt = cfg.clock.step(d.tau)?;
    let zero = ConstantSignal(0.0);
    let u: &dyn Signal = input.as_deref().unwrap_or(&zero);
    let r = verify_dissipation(&lkf, u, &InitialCondition::scalar(a.phi), eps, a.t_end, dt)?;
    out.write_json(
        "stability.json",
        &StabilityFile {
            eps_star,
            eps,
            state_coefficient: r.state_coefficient,
            dissipation_violations: r.dissipation_violations,
            worst_residual: r.worst_residual,
            tolerance: r.tolerance,
            diss_check_grid: r.diss_check_grid,
            checked_points: r.checked_points,
            gronwall_violations: r.gronwall_violations,
            fading_rate_estimate: r.fading_rate_estimate,
        },
    )
}

fn sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let cells = bench::sweep(cfg, &cfg.sweep);
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            let lambda = match c.config.dataset.lambda {
                bench::LambdaChoice::Fixed(l) => fmt_f64(l),
                bench::LambdaChoice::Auto(_) => "auto".into(),
            };
            let (train, test, status) = match (&c.report, &c.failure) {
                (Some(r), _) => (fmt_f64(r.nrmse_train), fmt_f64(r.nrmse_test), "ok".to_string()),
                (None, Some(f)) => (String::new(), String::new(), format!("{:?}", f.class).to_lowercase()),
                (None, None) => (String::new(), String::new(), "missing".into()),
            };
            vec![
                c.index.to_string(),
                fmt_f64(c.config.dynamics.a0),
                fmt_f64(c.config.dynamics.a1),
                fmt_f64(c.config.dynamics.tau),
                lambda,
                fmt_f64(c.config.clock.theta),
                c.config.clock.nodes.to_string(),
                train,
                test,
                status,
            ]
        })
        .collect();
    out.write_json("sweep.json", &cells)?;
    out.write_csv(
        "sweep.csv",
        &["index", "a0", "a1", "tau", "lambda", "theta", "nodes", "nrmse_train", "nrmse_test", "status"],
        &rows,
    )
}

/// Sizes the global thread pool from `DELAYRES_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DELAYRES_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("DELAYRES_THREADS = {value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}
