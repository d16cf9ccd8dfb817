use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DelayDynamics, HistoryBuffer, Trajectory};
use crate::error::{Error, Result};
use crate::signal::Signal;

type HistoryFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// Initial history `phi` on `[-max_delay, 0)` plus the state `x0` at `t = 0`.
///
/// `x0` defaults to the left limit `phi(0-)`, obtained by evaluating the
/// history function at zero.
#[derive(Clone)]
pub struct InitialCondition {
    dim: usize,
    phi: Arc<HistoryFn>,
    x0: Vec<f64>,
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialCondition")
            .field("dim", &self.dim)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl InitialCondition {
    pub fn constant(value: Vec<f64>) -> Self {
        let v = value.clone();
        Self {
            dim: value.len(),
            phi: Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&v)),
            x0: value,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::constant(vec![value])
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(vec![0.0; dim])
    }

    /// History from a function of `s` in `[-max_delay, 0]`.
    pub fn from_fn(dim: usize, phi: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        let mut x0 = vec![0.0; dim];
        phi(0.0, &mut x0);
        Self {
            dim,
            phi: Arc::new(phi),
            x0,
        }
    }

    pub fn scalar_fn(phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_fn(1, move |s, out| out[0] = phi(s))
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = x0;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn phi_at(&self, s: f64, out: &mut [f64]) {
        (self.phi)(s, out)
    }

    /// Sup norm of the history on `[-window, 0)` sampled with `step`,
    /// including `|x0|`.
    pub fn sup_norm(&self, window: f64, step: f64) -> f64 {
        let mut buf = vec![0.0; self.dim];
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let points = (window / step).ceil() as usize;
        (1..=points)
            .map(|i| {
                self.phi_at(-(i as f64) * step, &mut buf);
                norm(&buf)
            })
            .fold(norm(&self.x0), f64::max)
    }

    /// Grid samples of the history at `-m dt, ..., -dt` (oldest first).
    pub fn history_samples(&self, dt: f64, steps: usize) -> Vec<f64> {
        let mut out = vec![0.0; steps * self.dim];
        for (p, chunk) in out.chunks_exact_mut(self.dim).enumerate() {
            let s = -((steps - p) as f64) * dt;
            self.phi_at(s, chunk);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegratorOptions {
    /// Seed for the additive noise.
    pub seed: u64,
    /// Noise is switched off from this time on.
    pub noise_cutoff: Option<f64>,
}

/// Integrates on `[0, t_end]` with step `dt`; see [`integrate_with`].
pub fn integrate(
    dynamics: &DelayDynamics,
    init: &InitialCondition,
    input: &dyn Signal,
    t_end: f64,
    dt: f64,
    rng_seed: u64,
) -> Result<Trajectory> {
    let opts = IntegratorOptions {
        seed: rng_seed,
        noise_cutoff: None,
    };
    integrate_with(dynamics, init, input, t_end, dt, &opts)
}

/// Classical RK4 by the method of steps.
///
/// Every delay must be a whole number of steps. Delayed values at the stage
/// nodes `t`, `t + dt/2`, `t + dt` are read from the history: grid points are
/// exact, half-steps use cubic Hermite interpolation with the one-sided slopes
/// recorded during integration, and half-steps falling before `t = 0` are
/// evaluated from `phi` directly. The last stage uses the input's left limit
/// at `t + dt`, so piecewise-constant inputs with breakpoints on the grid
/// are integrated without smearing. Additive noise is constant over each step
/// and drawn from `N(0, noise_std^2)`.
pub fn integrate_with(
    dynamics: &DelayDynamics,
    init: &InitialCondition,
    input: &dyn Signal,
    t_end: f64,
    dt: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let n = dynamics.dim();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step dt = {dt} must be positive")));
    }
    if !(t_end.is_finite() && t_end >= dt * (1.0 - 1e-9)) {
        return Err(Error::Config(format!("t_end = {t_end} must be at least dt = {dt}")));
    }
    if init.dim() != n || init.x0().len() != n {
        return Err(Error::Contract(format!(
            "initial condition has dimension {}, dynamics {n}",
            init.dim()
        )));
    }
    if init.x0().iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("initial state x0 is not finite".into()));
    }
    let lags: Vec<usize> = dynamics
        .terms()
        .iter()
        .map(|term| {
            let m = (term.delay / dt).round();
            if m < 1.0 || (m * dt - term.delay).abs() > 1e-12 * term.delay.max(1.0) {
                Err(Error::Config(format!(
                    "delay {} is not a whole number of steps dt = {dt}",
                    term.delay
                )))
            } else {
                Ok(m as usize)
            }
        })
        .collect::<Result<_>>()?;
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let ratio = t_end / dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };

    let mut history = HistoryBuffer::new(n, dt, max_lag as f64 * dt)?;
    let prehistory = init.history_samples(dt, max_lag);
    for (p, x) in prehistory.chunks_exact(n).enumerate() {
        history.push(-((max_lag - p) as f64) * dt, x, None);
    }
    history.push(0.0, init.x0(), None);
    let mut phi_left = vec![0.0; n];
    init.phi_at(0.0, &mut phi_left);

    let noise = if dynamics.noise_std() > 0.0 {
        Some(
            Normal::new(0.0, dynamics.noise_std())
                .map_err(|e| Error::Config(format!("noise distribution: {e}")))?,
        )
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let terms = lags.len();
    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(init.x0());
    let mut x = init.x0().to_vec();
    let mut d_start = vec![0.0; terms * n];
    let mut d_mid = vec![0.0; terms * n];
    let mut d_end = vec![0.0; terms * n];
    let mut xi = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut slope_in = vec![0.0; n];
    let half = 0.5 * dt;

    for i in 0..steps {
        let t = i as f64 * dt;
        for (j, &m) in lags.iter().enumerate() {
            let slot = j * n..(j + 1) * n;
            history.back(m, &mut d_start[slot.clone()]);
            if i < m {
                init.phi_at((i as f64 - m as f64) * dt + half, &mut d_mid[slot.clone()]);
            } else {
                history.hermite_midpoint(m, &mut d_mid[slot.clone()]);
            }
            if i + 1 == m {
                d_end[slot].copy_from_slice(&phi_left);
            } else {
                history.back(m - 1, &mut d_end[slot]);
            }
        }
        let u_start = input.eval(t);
        let u_mid = input.eval(t + half);
        let u_end = input.eval_left(t + dt);
        match &noise {
            Some(dist) if opts.noise_cutoff.is_none_or(|c| t < c) => {
                xi.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
            }
            _ => xi.iter_mut().for_each(|v| *v = 0.0),
        }

        dynamics.rhs_into(&x, &d_start, u_start, &mut k1);
        add(&mut k1, &xi);
        axpy(&mut stage, &x, half, &k1);
        dynamics.rhs_into(&stage, &d_mid, u_mid, &mut k2);
        add(&mut k2, &xi);
        axpy(&mut stage, &x, half, &k2);
        dynamics.rhs_into(&stage, &d_mid, u_mid, &mut k3);
        add(&mut k3, &xi);
        axpy(&mut stage, &x, dt, &k3);
        dynamics.rhs_into(&stage, &d_end, u_end, &mut k4);
        add(&mut k4, &xi);
        for c in 0..n {
            x[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
            return Err(Error::Divergence {
                step: i + 1,
                time: t + dt,
            });
        }
        dynamics.rhs_into(&x, &d_end, u_end, &mut slope_in);
        add(&mut slope_in, &xi);
        history.set_latest_slope_out(&k1);
        history.push(t + dt, &x, Some(&slope_in));
        states.extend_from_slice(&x);
    }
    Trajectory::new(0.0, dt, n, states)
}

#[inline]
fn add(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

#[inline]
fn axpy(out: &mut [f64], x: &[f64], h: f64, k: &[f64]) {
    for c in 0..out.len() {
        out[c] = x[c] + h * k[c];
    }
}
