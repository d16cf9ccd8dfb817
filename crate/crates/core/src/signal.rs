//! Input preprocessing for single-node delay reservoirs: sample-and-hold,
//! T-periodic masking and virtual-node sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dde::Trajectory;
use crate::error::{Error, Result};
use crate::readout::StateMatrix;

/// A scalar signal of time.
pub trait Signal: Send + Sync {
    fn eval(&self, t: f64) -> f64;

    /// Left limit at `t`. Equal to [`Signal::eval`] for continuous signals.
    fn eval_left(&self, t: f64) -> f64 {
        self.eval(t)
    }
}

impl<S: Signal + ?Sized> Signal for &S {
    fn eval(&self, t: f64) -> f64 {
        (**self).eval(t)
    }
    fn eval_left(&self, t: f64) -> f64 {
        (**self).eval_left(t)
    }
}

impl<S: Signal + ?Sized> Signal for Box<S> {
    fn eval(&self, t: f64) -> f64 {
        (**self).eval(t)
    }
    fn eval_left(&self, t: f64) -> f64 {
        (**self).eval_left(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSignal(pub f64);

impl Signal for ConstantSignal {
    fn eval(&self, _t: f64) -> f64 {
        self.0
    }
}

/// Wraps a continuous closure.
pub struct FnSignal<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> Signal for FnSignal<F> {
    fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

/// Pointwise difference of two signals.
pub struct Difference<A, B>(pub A, pub B);

impl<A: Signal, B: Signal> Signal for Difference<A, B> {
    fn eval(&self, t: f64) -> f64 {
        self.0.eval(t) - self.1.eval(t)
    }
    fn eval_left(&self, t: f64) -> f64 {
        self.0.eval_left(t) - self.1.eval_left(t)
    }
}

/// Right-open steps: `values[k]` on `[start + k step, start + (k+1) step)`,
/// zero outside the covered range.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantSignal {
    step: f64,
    start: f64,
    values: Vec<f64>,
}

impl PiecewiseConstantSignal {
    pub fn new(step: f64, start: f64, values: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Contract(format!("step {step} must be positive")));
        }
        if values.is_empty() {
            return Err(Error::Contract("piecewise-constant signal needs values".into()));
        }
        Ok(Self {
            step,
            start,
            values,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end(&self) -> f64 {
        self.start + self.values.len() as f64 * self.step
    }

    // Breakpoints within 1e-9 steps snap, so grid-aligned evaluation is exact.
    fn position(&self, t: f64) -> (f64, bool) {
        let s = (t - self.start) / self.step;
        let r = s.round();
        if (s - r).abs() < 1e-9 {
            (r, true)
        } else {
            (s.floor(), false)
        }
    }

    fn at(&self, k: f64) -> f64 {
        if k < 0.0 || k >= self.values.len() as f64 {
            0.0
        } else {
            self.values[k as usize]
        }
    }
}

impl Signal for PiecewiseConstantSignal {
    fn eval(&self, t: f64) -> f64 {
        self.at(self.position(t).0)
    }

    fn eval_left(&self, t: f64) -> f64 {
        match self.position(t) {
            (k, true) => self.at(k - 1.0),
            (k, false) => self.at(k),
        }
    }
}

/// Holds `seq[k]` on `[k T, (k+1) T)`.
pub fn sample_and_hold(seq: &[f64], period: f64) -> Result<PiecewiseConstantSignal> {
    if seq.is_empty() {
        return Err(Error::Contract("sample-and-hold of an empty sequence".into()));
    }
    PiecewiseConstantSignal::new(period, 0.0, seq.to_vec())
}

/// Virtual-node spacing `theta`, node count `N` and clock cycle `T = N theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    pub theta: f64,
    pub nodes: usize,
    pub period: f64,
}

impl ClockConfig {
    pub fn new(theta: f64, nodes: usize) -> Result<Self> {
        Self::validated(theta, nodes, theta * nodes as f64)
    }

    /// Checks `T = N theta` to a relative tolerance of 1e-12.
    pub fn validated(theta: f64, nodes: usize, period: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Config(format!("theta = {theta} must be positive")));
        }
        if nodes == 0 {
            return Err(Error::Config("node count N must be at least 1".into()));
        }
        let expected = theta * nodes as f64;
        if !((period - expected).abs() <= 1e-12 * expected) {
            return Err(Error::Config(format!(
                "clock cycle T = {period} must equal N * theta = {expected}"
            )));
        }
        Ok(Self {
            theta,
            nodes,
            period: expected,
        })
    }

    /// Warning text when the clock cycle and the delay differ by more than a
    /// factor of 5.
    pub fn timescale_warning(&self, tau: f64) -> Option<String> {
        let ratio = self.period / tau;
        (!(0.2..=5.0).contains(&ratio)).then(|| {
            format!(
                "clock cycle T = {} and delay tau = {tau} differ by a factor {:.3}",
                self.period, ratio
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskScheme {
    #[default]
    Binary,
    Uniform,
}

/// Per-node input weights, applied periodically with slot width `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub values: Vec<f64>,
    pub theta: f64,
}

impl Mask {
    pub fn new(values: Vec<f64>, theta: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("mask needs at least one value".into()));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(Error::Contract("mask values are all zero".into()));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Config(format!("mask slot theta = {theta} must be positive")));
        }
        Ok(Self { values, theta })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.theta * self.values.len() as f64
    }
}

/// Draws `n` mask values: `Binary` from {-1, +1}, `Uniform` from [-1, 1].
pub fn generate_mask(n: usize, scheme: MaskScheme, seed: u64, theta: f64) -> Result<Mask> {
    if n < 1 {
        return Err(Error::Contract("mask length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let values: Vec<f64> = (0..n)
            .map(|_| match scheme {
                MaskScheme::Binary => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                MaskScheme::Uniform => rng.random_range(-1.0..=1.0),
            })
            .collect();
        // an all-zero uniform draw has probability zero, but stay total
        if values.iter().any(|v| *v != 0.0) {
            return Mask::new(values, theta);
        }
    }
}

/// `J(t) = I(t) * mask[floor(((t - start) mod T) / theta)]`, returned as a
/// piecewise-constant signal with step `theta`.
pub fn apply_mask(held: &PiecewiseConstantSignal, mask: &Mask) -> Result<PiecewiseConstantSignal> {
    let period = mask.period();
    if !((period - held.step()).abs() <= 1e-12 * held.step()) {
        return Err(Error::Config(format!(
            "mask period N * theta = {period} differs from the hold step T = {}",
            held.step()
        )));
    }
    let values = held
        .values()
        .iter()
        .flat_map(|v| mask.values.iter().map(move |m| v * m))
        .collect();
    PiecewiseConstantSignal::new(mask.theta, held.start(), values)
}

/// Row `k`, column `j` holds `x(offset + k T + (j + 1) theta)` (the state at
/// the end of each node slot); a trailing bias column of ones is appended.
/// Only the first state component is sampled.
pub fn sample_virtual_nodes(
    traj: &Trajectory,
    clock: &ClockConfig,
    n_steps: usize,
    offset: f64,
) -> Result<StateMatrix> {
    if n_steps == 0 {
        return Err(Error::Contract("at least one input step is required".into()));
    }
    let ratio = clock.theta / traj.dt();
    if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
        return Err(Error::Config(format!(
            "node spacing theta = {} is not a multiple of dt = {}",
            clock.theta,
            traj.dt()
        )));
    }
    let per_node = ratio.round() as usize;
    let needed = offset + n_steps as f64 * clock.period;
    if needed > traj.t_end() + 1e-9 * traj.dt() {
        return Err(Error::Contract(format!(
            "trajectory ends at {} but sampling needs {needed}",
            traj.t_end()
        )));
    }
    let first = traj.grid_index(offset)?;
    let cols = clock.nodes + 1;
    let mut data = Vec::with_capacity(n_steps * cols);
    for k in 0..n_steps {
        for j in 0..clock.nodes {
            let idx = first + (k * clock.nodes + j + 1) * per_node;
            data.push(traj.state(idx)[0]);
        }
        data.push(1.0);
    }
    StateMatrix::new(n_steps, cols, data)
}
