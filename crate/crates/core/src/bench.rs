//! NARMA10 benchmark harness, multi-seed runs, the two-configuration
//! trade-off study and parameter sweeps.

use std::ops::{Range, RangeInclusive};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dde::{integrate_with, DelayDynamics, InitialCondition, IntegratorOptions, Nonlinearity};
use crate::error::{Error, ErrorClass, Result, StageExt};
use crate::readout::{default_lambda_grid, narma10, nrmse, predict, ridge_fit, select_lambda, RidgeModel, StateMatrix};
use crate::separation::delta_k;
use crate::signal::{apply_mask, generate_mask, sample_and_hold, ClockConfig, MaskScheme, PiecewiseConstantSignal};
use crate::spectral::spectral_abscissa_scalar;
use crate::stability::iss_epsilon_critical;

/// Scalar reservoir `x' = a0 x + g(a1 x(t - tau) + b u) + xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub a0: f64,
    pub a1: f64,
    pub tau: f64,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default = "one")]
    pub input_gain: f64,
}

fn one() -> f64 {
    1.0
}

impl DynamicsSection {
    pub fn linear(a0: f64, a1: f64, tau: f64) -> Self {
        Self {
            a0,
            a1,
            tau,
            nonlinearity: Nonlinearity::Identity,
            noise_std: 0.0,
            input_gain: 1.0,
        }
    }

    pub fn build(&self) -> Result<DelayDynamics> {
        let d = DelayDynamics::scalar(self.a0, &[(self.a1, self.tau)])?;
        let d = DelayDynamics::new(
            1,
            d.a0().to_vec(),
            d.terms().to_vec(),
            self.nonlinearity,
            vec![self.input_gain],
        )?;
        d.with_noise(self.noise_std)
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinearity == Nonlinearity::Identity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSection {
    pub theta: f64,
    pub nodes: usize,
    /// Clock cycle `T`; defaults to `nodes * theta` and must match it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Integration step; defaults to `min(theta, tau) / 20`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl ClockSection {
    pub fn clock(&self) -> Result<ClockConfig> {
        match self.period {
            Some(p) => ClockConfig::validated(self.theta, self.nodes, p),
            None => ClockConfig::new(self.theta, self.nodes),
        }
    }

    pub fn step(&self, tau: f64) -> Result<f64> {
        let dt = self.dt.unwrap_or(self.theta.min(tau) / 20.0);
        for (name, len) in [("theta", self.theta), ("tau", tau)] {
            let r = len / dt;
            if !(dt > 0.0) || (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
                return Err(Error::Config(format!(
                    "{name} = {len} is not a whole number of steps dt = {dt}; set clock.dt"
                )));
            }
        }
        Ok(dt)
    }
}

/// Ridge parameter: a fixed value or `"auto"` (validation-split selection).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Fixed(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Fixed(1e-6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub train: usize,
    pub test: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub lambda: LambdaChoice,
    #[serde(default)]
    pub mask: MaskScheme,
    #[serde(default = "yes")]
    pub noise_at_test: bool,
}

fn default_warmup() -> usize {
    50
}

fn yes() -> bool {
    true
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            train: 500,
            test: 70,
            warmup: default_warmup(),
            lambda: LambdaChoice::default(),
            mask: MaskScheme::Binary,
            noise_at_test: true,
        }
    }
}

/// Drive for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Constant { value: f64 },
    Cosine { period: f64, amplitude: f64 },
    /// The masked, held NARMA10 input stream of the benchmark.
    Reservoir,
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_t1_values")]
    pub t1_values: Vec<f64>,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    /// Dissipation gain; defaults to `1.1 eps*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Constant initial history.
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default = "default_branches")]
    pub branches: usize,
}

fn default_t1_values() -> Vec<f64> {
    vec![20.0, 50.0]
}
fn default_kmax() -> usize {
    10
}
fn default_t_end() -> f64 {
    50.0
}
fn default_branches() -> usize {
    20
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            t1_values: default_t1_values(),
            kmax: default_kmax(),
            eps: None,
            t_end: default_t_end(),
            phi: 0.0,
            input: InputSpec::default(),
            branches: default_branches(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub input: u64,
    pub mask: u64,
    pub noise: u64,
}

impl Seeds {
    /// Decorrelated seeds for the three streams from one integer.
    pub fn derived(seed: u64) -> Self {
        let mix = |k: u64| {
            let mut z = seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        Self {
            input: mix(1),
            mask: mix(2),
            noise: mix(3),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::derived(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dynamics: DynamicsSection,
    pub clock: ClockSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub seeds: Seeds,
    /// Grid for `sweep`; ignored by single runs.
    #[serde(default, skip_serializing_if = "SweepGrid::is_empty")]
    pub sweep: SweepGrid,
}

impl ExperimentConfig {
    /// `theta = 0.2`, `N = 10`, noise 0.001, 500 train / 70 test.
    pub fn narma_default(dynamics: DynamicsSection) -> Self {
        Self {
            dynamics: DynamicsSection {
                noise_std: 1e-3,
                ..dynamics
            },
            clock: ClockSection {
                theta: 0.2,
                nodes: 10,
                period: None,
                dt: None,
            },
            dataset: DatasetSection::default(),
            analysis: AnalysisSection::default(),
            seeds: Seeds::default(),
            sweep: SweepGrid::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.build()?;
        self.clock.clock()?;
        self.clock.step(self.dynamics.tau)?;
        let d = &self.dataset;
        if d.train < 2 || d.test < 2 {
            return Err(Error::Config(format!(
                "dataset needs at least 2 train and 2 test rows, got {} / {}",
                d.train, d.test
            )));
        }
        if let LambdaChoice::Fixed(l) = d.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("dataset.lambda = {l} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Input sequence length: one extra value so row `k` can predict
    /// `y[k + 1]`.
    pub fn sequence_len(&self) -> usize {
        self.dataset.warmup + self.dataset.train + self.dataset.test + 1
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seeds: Seeds::derived(seed),
            ..self.clone()
        }
    }
}

/// Reservoir features and aligned targets; row `k` is paired with `y[k + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub states: StateMatrix,
    pub targets: Vec<f64>,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

impl Dataset {
    pub fn train_rows(&self) -> Result<(StateMatrix, &[f64])> {
        Ok((self.states.slice_rows(self.train.clone())?, &self.targets[self.train.clone()]))
    }

    pub fn test_rows(&self) -> Result<(StateMatrix, &[f64])> {
        Ok((self.states.slice_rows(self.test.clone())?, &self.targets[self.test.clone()]))
    }
}

fn spectral_check(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    let d = &cfg.dynamics;
    if !d.is_linear() {
        return Ok(None);
    }
    let s0 = spectral_abscissa_scalar(d.a0, d.a1, d.tau, cfg.analysis.branches)?.s0;
    if s0 >= 0.0 {
        return Err(Error::Instability(format!(
            "free reservoir is not asymptotically stable: s0 = {s0}"
        )));
    }
    Ok(Some(s0))
}

/// The raw input sequence (uniform on `[0, 0.5]`) and its held, masked
/// drive over the first `len - 1` clock cycles.
pub fn reservoir_drive(cfg: &ExperimentConfig) -> Result<(Vec<f64>, PiecewiseConstantSignal)> {
    let len = cfg.sequence_len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.input);
    let inputs: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..=0.5)).collect();
    let clock = cfg.clock.clock().stage("clock")?;
    let held = sample_and_hold(&inputs[..len - 1], clock.period).stage("sample-and-hold")?;
    let mask = generate_mask(clock.nodes, cfg.dataset.mask, cfg.seeds.mask, clock.theta).stage("mask")?;
    let drive = apply_mask(&held, &mask).stage("mask")?;
    Ok((inputs, drive))
}

/// Uniform `[0, 0.5]` inputs, NARMA10 targets, masked drive, integration and
/// virtual-node sampling.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate().stage("config")?;
    let (inputs, drive) = reservoir_drive(cfg)?;
    let len = inputs.len();
    let y = narma10(&inputs, len, 0).stage("narma10")?;
    let clock = cfg.clock.clock().stage("clock")?;
    let steps = len - 1;

    let dynamics = cfg.dynamics.build().stage("dynamics")?;
    let dt = cfg.clock.step(cfg.dynamics.tau).stage("clock")?;
    let fit_end = cfg.dataset.warmup + cfg.dataset.train;
    let opts = IntegratorOptions {
        seed: cfg.seeds.noise,
        noise_cutoff: (!cfg.dataset.noise_at_test).then_some(fit_end as f64 * clock.period),
    };
    let t_end = steps as f64 * clock.period;
    let traj = integrate_with(&dynamics, &InitialCondition::zero(1), &drive, t_end, dt, &opts).stage("integrate")?;
    let states = crate::signal::sample_virtual_nodes(&traj, &clock, steps, 0.0).stage("virtual-nodes")?;
    Ok(Dataset {
        targets: y[1..].to_vec(),
        inputs,
        states,
        train: cfg.dataset.warmup..fit_end,
        test: fit_end..steps,
    })
}

pub fn fit_readout(data: &Dataset, lambda: LambdaChoice) -> Result<RidgeModel> {
    let (x, y) = data.train_rows().stage("readout")?;
    let lambda = match lambda {
        LambdaChoice::Fixed(l) => l,
        LambdaChoice::Auto(_) => select_lambda(&x, y, &default_lambda_grid(), 0.2).stage("lambda-selection")?,
    };
    ridge_fit(&x, y, lambda).stage("readout")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: ExperimentConfig,
    pub nrmse_train: f64,
    pub nrmse_test: f64,
    pub lambda: f64,
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_abscissa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timescale_warning: Option<String>,
    pub test_targets: Vec<f64>,
    pub test_predictions: Vec<f64>,
    /// Wall-clock time; kept out of serialized output so reruns are
    /// byte-identical.
    #[serde(skip)]
    pub runtime: Duration,
}

pub fn run_narma10(cfg: &ExperimentConfig) -> Result<BenchmarkReport> {
    let start = Instant::now();
    let s0 = spectral_check(cfg).stage("spectral-check")?;
    let clock = cfg.clock.clock().stage("clock")?;
    let timescale_warning = clock.timescale_warning(cfg.dynamics.tau);
    if let Some(w) = &timescale_warning {
        log::warn!("{w}");
    }
    let data = build_dataset(cfg)?;
    let model = fit_readout(&data, cfg.dataset.lambda)?;
    let (xtr, ytr) = data.train_rows()?;
    let (xte, yte) = data.test_rows()?;
    let nrmse_train = nrmse(ytr, &predict(&xtr, &model)?).stage("score")?;
    let test_predictions = predict(&xte, &model)?;
    let nrmse_test = nrmse(yte, &test_predictions).stage("score")?;
    if !(nrmse_train.is_finite() && nrmse_test.is_finite()) {
        return Err(Error::Numerical("non-finite NRMSE".into()).at_stage("score"));
    }
    let runtime = start.elapsed();
    log::info!("NARMA10 test NRMSE {nrmse_test:.4} in {runtime:?}");
    Ok(BenchmarkReport {
        config: cfg.clone(),
        nrmse_train,
        nrmse_test,
        lambda: model.lambda,
        weights: model.weights,
        spectral_abscissa: s0,
        timescale_warning,
        test_targets: yte.to_vec(),
        test_predictions,
        runtime,
    })
}

/// NRMSE on the test rows of predicting every target by the training mean.
pub fn train_mean_baseline(cfg: &ExperimentConfig) -> Result<f64> {
    let len = cfg.sequence_len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.input);
    let inputs: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..=0.5)).collect();
    let y = narma10(&inputs, len, 0)?;
    let fit_end = cfg.dataset.warmup + cfg.dataset.train;
    let train = &y[cfg.dataset.warmup + 1..fit_end + 1];
    let mean = train.iter().sum::<f64>() / train.len() as f64;
    let test = &y[fit_end + 1..];
    nrmse(test, &vec![mean; test.len()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub nrmse_train: f64,
    pub nrmse_test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub per_seed: Vec<SeedResult>,
    pub median_test: f64,
    pub mean_test: f64,
    pub median_train: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the benchmark once per seed (in parallel) with [`Seeds::derived`].
pub fn run_narma10_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<MultiSeedReport> {
    if seeds.is_empty() {
        return Err(Error::Contract("no seeds given".into()));
    }
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let r = run_narma10(&cfg.with_seed(seed))?;
            Ok(SeedResult {
                seed,
                nrmse_train: r.nrmse_train,
                nrmse_test: r.nrmse_test,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let test: Vec<f64> = per_seed.iter().map(|r| r.nrmse_test).collect();
    let train: Vec<f64> = per_seed.iter().map(|r| r.nrmse_train).collect();
    Ok(MultiSeedReport {
        median_test: median(&test),
        mean_test: test.iter().sum::<f64>() / test.len() as f64,
        median_train: median(&train),
        per_seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub t1: f64,
    pub k: i64,
    pub delta_inv_1: f64,
    pub delta_inv_2: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCell {
    /// 1 or 2.
    pub config: u8,
    pub t1: f64,
    pub theta: f64,
    pub nrmse_test: f64,
    pub timescale_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub s0: (f64, f64),
    pub eps_star: (f64, f64),
    pub rows: Vec<TradeoffRow>,
    /// `(t1, mean over k of the per-k ratio of inverse Delta_k, config 2 /
    /// config 1)`.
    pub mean_ratio: Vec<(f64, f64)>,
    /// `(t1, sum_k 1/Delta_k for config 2 over the same sum for config 1)`.
    pub ratio_of_sums: Vec<(f64, f64)>,
    pub cells: Vec<TradeoffCell>,
}

/// Compares two linear configurations with matching spectral abscissa.
/// With `with_nrmse`, also runs the benchmark at clock cycle `T = t1`,
/// keeping `N` and setting `theta = T / N`.
pub fn run_tradeoff_study(
    config1: &ExperimentConfig,
    config2: &ExperimentConfig,
    t_values: &[f64],
    k_range: RangeInclusive<i64>,
    with_nrmse: bool,
) -> Result<TradeoffReport> {
    let configs = [config1, config2];
    let mut s0 = [0.0; 2];
    let mut eps = [0.0; 2];
    for (i, c) in configs.iter().enumerate() {
        let d = &c.dynamics;
        if !d.is_linear() {
            return Err(Error::Unsupported("trade-off study needs linear reservoirs".into()));
        }
        s0[i] = spectral_abscissa_scalar(d.a0, d.a1, d.tau, c.analysis.branches)?.s0;
        eps[i] = iss_epsilon_critical(d.a0, d.a1)?;
    }
    if (s0[0] - s0[1]).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "configurations must share the spectral abscissa: {} vs {}",
            s0[0], s0[1]
        )));
    }
    let mut rows = Vec::new();
    let mut mean_ratio = Vec::new();
    let mut ratio_of_sums = Vec::new();
    for &t1 in t_values {
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut sum = 0.0;
        let mut count = 0;
        for k in k_range.clone() {
            let inv = |c: &ExperimentConfig| 1.0 / delta_k(c.dynamics.a0, &[(c.dynamics.a1, c.dynamics.tau)], t1, k);
            let (i1, i2) = (inv(config1), inv(config2));
            rows.push(TradeoffRow {
                t1,
                k,
                delta_inv_1: i1,
                delta_inv_2: i2,
                ratio: i2 / i1,
            });
            sum += i2 / i1;
            s1 += i1;
            s2 += i2;
            count += 1;
        }
        mean_ratio.push((t1, sum / count.max(1) as f64));
        ratio_of_sums.push((t1, s2 / s1));
    }
    let mut cells = Vec::new();
    if with_nrmse {
        let jobs: Vec<(u8, f64, ExperimentConfig)> = t_values
            .iter()
            .flat_map(|&t1| {
                configs.iter().enumerate().map(move |(i, c)| {
                    let mut cfg = (*c).clone();
                    cfg.clock.theta = t1 / cfg.clock.nodes as f64;
                    cfg.clock.period = None;
                    cfg.clock.dt = None;
                    (i as u8 + 1, t1, cfg)
                })
            })
            .collect();
        cells = jobs
            .par_iter()
            .map(|(which, t1, cfg)| {
                let r = run_narma10(cfg)?;
                Ok(TradeoffCell {
                    config: *which,
                    t1: *t1,
                    theta: cfg.clock.theta,
                    nrmse_test: r.nrmse_test,
                    timescale_warning: r.timescale_warning,
                })
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(TradeoffReport {
        s0: (s0[0], s0[1]),
        eps_star: (eps[0], eps[1]),
        rows,
        mean_ratio,
        ratio_of_sums,
        cells,
    })
}

/// Axes of a sweep; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub nodes: Vec<usize>,
    pub seed: Vec<u64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.a0.is_empty()
            && self.a1.is_empty()
            && self.tau.is_empty()
            && self.lambda.is_empty()
            && self.theta.is_empty()
            && self.nodes.is_empty()
            && self.seed.is_empty()
    }

    /// Cells in row-major order over `(a0, a1, tau, lambda, theta, nodes, seed)`.
    pub fn cells(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        fn axis<T: Copy>(values: &[T], base: Option<T>) -> Vec<Option<T>> {
            if values.is_empty() {
                vec![base]
            } else {
                values.iter().map(|v| Some(*v)).collect()
            }
        }
        let mut base = base.clone();
        base.sweep = SweepGrid::default();
        let base = &base;
        let mut out = Vec::new();
        for a0 in axis(&self.a0, None) {
            for a1 in axis(&self.a1, None) {
                for tau in axis(&self.tau, None) {
                    for lambda in axis(&self.lambda, None) {
                        for theta in axis(&self.theta, None) {
                            for nodes in axis(&self.nodes, None) {
                                for seed in axis(&self.seed, None) {
                                    let mut c = base.clone();
                                    if let Some(v) = a0 {
                                        c.dynamics.a0 = v;
                                    }
                                    if let Some(v) = a1 {
                                        c.dynamics.a1 = v;
                                    }
                                    if let Some(v) = tau {
                                        c.dynamics.tau = v;
                                    }
                                    if let Some(v) = lambda {
                                        c.dataset.lambda = LambdaChoice::Fixed(v);
                                    }
                                    if theta.is_some() || nodes.is_some() {
                                        c.clock.theta = theta.unwrap_or(c.clock.theta);
                                        c.clock.nodes = nodes.unwrap_or(c.clock.nodes);
                                        c.clock.period = None;
                                    }
                                    if let Some(s) = seed {
                                        c.seeds = Seeds::derived(s);
                                    }
                                    out.push(c);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    Configuration,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub class: FailureClass,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<BenchmarkReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<SweepFailure>,
}

/// Runs every cell independently; failures are recorded per cell and the
/// output is ordered by grid index regardless of scheduling.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Vec<SweepCell> {
    grid.cells(base)
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| match run_narma10(&config) {
            Ok(r) => SweepCell {
                index,
                config,
                report: Some(r),
                failure: None,
            },
            Err(e) => {
                log::warn!("sweep cell {index} failed: {e}");
                let class = match e.class() {
                    ErrorClass::Configuration => FailureClass::Configuration,
                    ErrorClass::Numerical => FailureClass::Numerical,
                };
                SweepCell {
                    index,
                    config,
                    report: None,
                    failure: Some(SweepFailure {
                        class,
                        message: e.to_string(),
                    }),
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config1() -> ExperimentConfig {
        let mut c = ExperimentConfig::narma_default(DynamicsSection::linear(-1.0, 0.9 * (-0.1f64).exp(), 1.0));
        c.dataset.train = 120;
        c.dataset.test = 30;
        c.dataset.warmup = 20;
        c
    }

    #[test]
    fn config_json_round_trip() {
        let c = config1();
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let auto: LambdaChoice = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, LambdaChoice::Auto(AutoKeyword::Auto));
        assert!(serde_json::from_str::<LambdaChoice>("\"manual\"").is_err());
    }

    #[test]
    fn period_mismatch_is_config_error() {
        let mut c = config1();
        c.clock.period = Some(3.0);
        let e = run_narma10(&c).unwrap_err();
        assert_eq!(e.class(), ErrorClass::Configuration);
        assert!(e.to_string().contains("N * theta"));
    }

    #[test]
    fn default_step_divides_clock_and_delay() {
        assert!((config1().clock.step(1.0).unwrap() - 0.01).abs() < 1e-15);
        let c = ClockSection {
            theta: 0.3,
            nodes: 10,
            period: None,
            dt: Some(0.07),
        };
        assert!(matches!(c.step(1.0), Err(Error::Config(_))));
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run_narma10(&config1()).unwrap();
        let b = run_narma10(&config1()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.nrmse_test.is_finite() && a.nrmse_test >= 0.0);
        assert_eq!(a.test_predictions.len(), 30);
    }

    #[test]
    fn test_targets_do_not_touch_the_fit() {
        let data = build_dataset(&config1()).unwrap();
        let model = fit_readout(&data, LambdaChoice::Fixed(1e-6)).unwrap();
        let mut perturbed = data.clone();
        for i in perturbed.test.clone() {
            perturbed.targets[i] += 10.0;
        }
        let again = fit_readout(&perturbed, LambdaChoice::Fixed(1e-6)).unwrap();
        assert_eq!(model.weights, again.weights);
        let auto = fit_readout(&data, LambdaChoice::Auto(AutoKeyword::Auto)).unwrap();
        let auto_again = fit_readout(&perturbed, LambdaChoice::Auto(AutoKeyword::Auto)).unwrap();
        assert_eq!(auto.weights, auto_again.weights);
    }

    #[test]
    fn trained_model_beats_train_mean_on_train() {
        let r = run_narma10(&config1()).unwrap();
        assert!(r.nrmse_train <= 1.0 + 1e-12);
    }

    #[test]
    fn train_mean_ablation_is_near_one() {
        let mut c = config1();
        c.dataset.test = 400;
        let v = train_mean_baseline(&c).unwrap();
        assert!((v - 1.0).abs() < 0.15, "{v}");
    }

    #[test]
    fn stage_is_named_on_failure() {
        let mut c = config1();
        c.dynamics.a0 = 0.5;
        let e = run_narma10(&c).unwrap_err();
        assert!(matches!(e, Error::Stage { stage: "spectral-check", .. }));
        assert_eq!(e.class(), ErrorClass::Numerical);
    }

    #[test]
    fn tradeoff_ratios_and_mismatch() {
        let c1 = config1();
        let mut c2 = config1();
        c2.dynamics.a0 = -0.5;
        c2.dynamics.a1 = 0.4 * (-0.1f64).exp();
        let r = run_tradeoff_study(&c1, &c2, &[20.0, 50.0], 1..=10, false).unwrap();
        assert_eq!(r.rows.len(), 20);
        assert!((r.mean_ratio[0].1 - 1.59606).abs() < 1e-4);
        assert!((r.mean_ratio[1].1 - 1.77720).abs() < 1e-4);
        assert!((r.ratio_of_sums[0].1 - 1.75638).abs() < 1e-4);
        assert!((r.rows[0].ratio - 1.803).abs() < 1e-3);
        assert!((r.eps_star.0 - 2.693).abs() < 1e-3);
        assert!((r.eps_star.1 - 3.622).abs() < 1e-3);
        c2.dynamics.a1 = 0.3;
        assert!(matches!(
            run_tradeoff_study(&c1, &c2, &[20.0], 1..=10, false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_cell_sweep_matches_direct_run() {
        let c = config1();
        let cells = sweep(&c, &SweepGrid::default());
        assert_eq!(cells.len(), 1);
        let direct = serde_json::to_string(&run_narma10(&c).unwrap()).unwrap();
        assert_eq!(serde_json::to_string(cells[0].report.as_ref().unwrap()).unwrap(), direct);
    }

    #[test]
    fn sweep_isolates_failures_and_keeps_order() {
        let grid = SweepGrid {
            a0: vec![-1.0, 0.5],
            seed: vec![1, 2],
            ..Default::default()
        };
        let cells = sweep(&config1(), &grid);
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
        assert!(cells[0].report.is_some() && cells[1].report.is_some());
        assert_ne!(cells[0].config.seeds, cells[1].config.seeds);
        assert_ne!(
            cells[0].report.as_ref().unwrap().nrmse_test,
            cells[1].report.as_ref().unwrap().nrmse_test
        );
        for c in &cells[2..] {
            let f = c.failure.as_ref().unwrap();
            assert_eq!(f.class, FailureClass::Numerical);
            assert!(f.message.contains("spectral-check"));
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
