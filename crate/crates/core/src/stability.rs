//! Lyapunov–Krasovskii checks for scalar linear delay reservoirs.
//!
//! For `x' = a0 x + a1 x(t - tau) + u` with `a0 + |a1| < 0` the functional
//!
//! ```text
//! V(x_t) = x(t)^2 + |a1| int_{-tau}^0 x(t + s)^2 ds
//! ```
//!
//! satisfies `D+V <= (2 a0 + 2 |a1| + 1/eps) x(t)^2 + eps u(t)^2` for every
//! `eps > eps* = 1 / (-2 (a0 + |a1|))`. The routines here evaluate `V` along
//! simulated trajectories and check that inequality, and its integrated
//! form, on the grid.

use crate::dde::{integrate, DelayDynamics, HistoryBuffer, InitialCondition, Trajectory};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// Parameters of the quadratic functional; requires `a0 + |a1| < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkfConfig {
    pub a0: f64,
    pub a1: f64,
    pub tau: f64,
}

impl LkfConfig {
    pub fn new(a0: f64, a1: f64, tau: f64) -> Result<Self> {
        if !(a0 + a1.abs() < 0.0) {
            return Err(Error::Domain(format!(
                "quadratic functional needs a0 + |a1| < 0, got {}",
                a0 + a1.abs()
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Domain(format!("delay tau = {tau} must be positive")));
        }
        Ok(Self { a0, a1, tau })
    }

    /// Coefficient of `x^2` in the dissipation inequality.
    pub fn state_coefficient(&self, eps: f64) -> f64 {
        2.0 * self.a0 + 2.0 * self.a1.abs() + 1.0 / eps
    }

    /// `1 + |a1| tau`, the upper sandwich constant `V <= c ||x_t||^2`.
    pub fn sandwich_constant(&self) -> f64 {
        1.0 + self.a1.abs() * self.tau
    }

    pub fn dynamics(&self) -> Result<DelayDynamics> {
        DelayDynamics::scalar_linear(self.a0, self.a1, self.tau)
    }
}

fn trapezoid(h: f64, samples: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = samples.len();
    samples
        .enumerate()
        .map(|(i, v)| if i == 0 || i + 1 == n { 0.5 * v } else { v })
        .sum::<f64>()
        * h
}

/// `V(x_t)` from a scalar history covering `[t - tau, t]`.
pub fn lkf_value(history: &HistoryBuffer, cfg: &LkfConfig) -> Result<f64> {
    if history.dim() != 1 {
        return Err(Error::Unsupported("functional is defined for scalar states".into()));
    }
    let window = history.window(cfg.tau)?;
    let x = window[window.len() - 1];
    let integral = trapezoid(history.grid_step(), window.iter().map(|v| v * v));
    Ok(x * x + cfg.a1.abs() * integral)
}

/// `V` at every grid point of `traj`, with the window before `t = 0` taken
/// from `init` sampled on the same grid.
pub fn lkf_series(init: &InitialCondition, traj: &Trajectory, cfg: &LkfConfig) -> Result<Vec<f64>> {
    let (extended, lag) = extended_samples(init, traj, cfg.tau)?;
    let h = traj.dt();
    let sq: Vec<f64> = extended.iter().map(|v| v * v).collect();
    // running sum of the window, then trapezoid end corrections
    let mut window: f64 = sq[..=lag].iter().sum();
    let mut out = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let end = i + lag;
        if i > 0 {
            window += sq[end] - sq[i - 1];
        }
        let integral = h * (window - 0.5 * (sq[i] + sq[end]));
        out.push(sq[end] + cfg.a1.abs() * integral);
    }
    Ok(out)
}

/// History samples at `-lag dt .. -dt` followed by the trajectory.
fn extended_samples(init: &InitialCondition, traj: &Trajectory, tau: f64) -> Result<(Vec<f64>, usize)> {
    if traj.dim() != 1 || init.dim() != 1 {
        return Err(Error::Unsupported("functional is defined for scalar states".into()));
    }
    let dt = traj.dt();
    let lag = (tau / dt).round();
    if lag < 1.0 || (lag * dt - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::Config(format!(
            "delay {tau} is not a whole number of steps dt = {dt}"
        )));
    }
    let lag = lag as usize;
    let mut extended = init.history_samples(dt, lag);
    extended.extend_from_slice(traj.states());
    Ok((extended, lag))
}

/// `eps* = 1 / (-2 (a0 + |a1|))`.
pub fn iss_epsilon_critical(a0: f64, a1: f64) -> Result<f64> {
    let margin = a0 + a1.abs();
    if !(margin < 0.0) {
        return Err(Error::Domain(format!(
            "a0 + |a1| = {margin} >= 0: the quadratic functional does not apply"
        )));
    }
    Ok(1.0 / (-2.0 * margin))
}

/// Forward difference `(V[i+1] - V[i]) / h`.
pub fn driver_derivative_numeric(values: &[f64], index: usize, h: f64) -> Result<f64> {
    if index + 1 >= values.len() {
        return Err(Error::Contract(format!(
            "forward difference at index {index} needs {} samples",
            index + 2
        )));
    }
    if !(h > 0.0) {
        return Err(Error::Contract(format!("step h = {h} must be positive")));
    }
    Ok((values[index + 1] - values[index]) / h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub eps_star: f64,
    pub eps: f64,
    /// `2 a0 + 2 |a1| + 1/eps`.
    pub state_coefficient: f64,
    /// Grid points where `D+V` exceeds the bound by more than `tolerance`.
    pub dissipation_violations: usize,
    /// Largest `D+V - bound` over the grid (may be negative).
    pub worst_residual: f64,
    pub tolerance: f64,
    pub diss_check_grid: f64,
    /// Points where `V(x_t) > e^{-kappa t} V(x_0) + (eps / kappa) ||u||^2` by
    /// more than `tolerance`.
    pub gronwall_violations: usize,
    pub gronwall_worst_excess: f64,
    /// Least-squares decay exponent of `|x|` on the second half of the run.
    pub fading_rate_estimate: Option<f64>,
    pub checked_points: usize,
}

/// Integrates `x' = a0 x + a1 x(t - tau) + u` and checks the dissipation
/// inequality at every grid point with the forward-difference Driver
/// derivative. Tolerance: `10 dt (1 + max x^2)`.
pub fn verify_dissipation(
    cfg: &LkfConfig,
    input: &dyn Signal,
    init: &InitialCondition,
    eps: f64,
    t_end: f64,
    dt: f64,
) -> Result<StabilityReport> {
    let eps_star = iss_epsilon_critical(cfg.a0, cfg.a1)?;
    if !(eps > eps_star) {
        return Err(Error::Domain(format!(
            "eps = {eps} must exceed the critical value {eps_star}"
        )));
    }
    let traj = integrate(&cfg.dynamics()?, init, input, t_end, dt, 0)?;
    dissipation_on_trajectory(cfg, input, init, &traj, eps)
}

/// [`verify_dissipation`] on an existing trajectory.
pub fn dissipation_on_trajectory(
    cfg: &LkfConfig,
    input: &dyn Signal,
    init: &InitialCondition,
    traj: &Trajectory,
    eps: f64,
) -> Result<StabilityReport> {
    let eps_star = iss_epsilon_critical(cfg.a0, cfg.a1)?;
    let v = lkf_series(init, traj, cfg)?;
    let dt = traj.dt();
    let coeff = cfg.state_coefficient(eps);
    let xs: Vec<f64> = traj.component(0).collect();
    let max_sq = xs.iter().fold(0.0, |m: f64, x| m.max(x * x));
    let tolerance = 10.0 * dt * (1.0 + max_sq);

    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..v.len() - 1 {
        let u = input.eval(traj.time(i));
        let bound = coeff * xs[i] * xs[i] + eps * u * u;
        let residual = driver_derivative_numeric(&v, i, dt)? - bound;
        worst = worst.max(residual);
        if residual > tolerance {
            violations += 1;
        }
    }

    let kappa = -coeff / cfg.sandwich_constant();
    let mut sup_u2: f64 = 0.0;
    let mut g_violations = 0;
    let mut g_worst = f64::NEG_INFINITY;
    for (i, vi) in v.iter().enumerate() {
        let t = traj.time(i);
        sup_u2 = sup_u2.max(input.eval(t).powi(2));
        let bound = (-kappa * (t - traj.t0())).exp() * v[0] + eps / kappa * sup_u2;
        let excess = vi - bound;
        g_worst = g_worst.max(excess);
        if excess > tolerance {
            g_violations += 1;
        }
    }

    let half = traj.len() / 2;
    let fading_rate_estimate = fit_log_slope(
        (half..traj.len()).map(|i| (traj.time(i), xs[i].abs())),
    );
    Ok(StabilityReport {
        eps_star,
        eps,
        state_coefficient: coeff,
        dissipation_violations: violations,
        worst_residual: worst,
        tolerance,
        diss_check_grid: dt,
        gronwall_violations: g_violations,
        gronwall_worst_excess: g_worst,
        fading_rate_estimate,
        checked_points: v.len() - 1,
    })
}

/// Least-squares slope of `ln y` against `t`, skipping `y <= 1e-300`.
pub fn fit_log_slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.filter(|(_, y)| *y > 1e-300).map(|(t, y)| (t, y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaIssReport {
    /// `d = x^u(phi) - x^v(psi)` vanishes identically.
    pub trivially_satisfied: bool,
    pub sup_difference: f64,
    /// Decay exponent of `|d|` fitted on `[t_end / 4, t_end]`.
    pub decay_exponent: Option<f64>,
    /// `max_t |d(t)| / ||u - v||_{[0, t]}` where the input difference is
    /// nonzero.
    pub gamma_slope: Option<f64>,
    pub difference: Trajectory,
}

/// Trajectory-level incremental stability check for noise-free dynamics.
#[allow(clippy::too_many_arguments)]
pub fn verify_delta_iss(
    dynamics: &DelayDynamics,
    u: &dyn Signal,
    v: &dyn Signal,
    phi: &InitialCondition,
    psi: &InitialCondition,
    t_end: f64,
    dt: f64,
) -> Result<DeltaIssReport> {
    if dynamics.noise_std() > 0.0 {
        return Err(Error::Contract("incremental checks need noise-free dynamics".into()));
    }
    let a = integrate(dynamics, phi, u, t_end, dt, 0)?;
    let b = integrate(dynamics, psi, v, t_end, dt, 0)?;
    let d = a.difference(&b)?;
    let norms: Vec<f64> = d.norms().collect();
    let sup_difference = norms.iter().fold(0.0, |m: f64, x| m.max(*x));
    if sup_difference == 0.0 {
        return Ok(DeltaIssReport {
            trivially_satisfied: true,
            sup_difference,
            decay_exponent: None,
            gamma_slope: None,
            difference: d,
        });
    }
    let start = d.index_of(t_end / 4.0)?;
    let decay_exponent = fit_log_slope((start..d.len()).map(|i| (d.time(i), norms[i])));
    let mut sup_input: f64 = 0.0;
    let mut gamma: Option<f64> = None;
    for (i, n) in norms.iter().enumerate() {
        let t = d.time(i);
        sup_input = sup_input.max((u.eval(t) - v.eval(t)).abs());
        if sup_input > 0.0 {
            let r = n / sup_input;
            gamma = Some(gamma.map_or(r, |g| g.max(r)));
        }
    }
    Ok(DeltaIssReport {
        trivially_satisfied: false,
        sup_difference,
        decay_exponent,
        gamma_slope: gamma,
        difference: d,
    })
}

/// `sup_{s in [t, t + window]} |d(s)|` for each grid `t` with a full window.
pub fn windowed_sup(traj: &Trajectory, window: f64) -> Vec<f64> {
    let w = (window / traj.dt()).round() as usize;
    let norms: Vec<f64> = traj.norms().collect();
    if norms.len() <= w {
        return Vec::new();
    }
    (0..norms.len() - w)
        .map(|i| norms[i..=i + w].iter().fold(0.0, |m: f64, x| m.max(*x)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separation::TrigPolynomial;
    use crate::signal::ConstantSignal;
    use rand::SeedableRng;

    fn config1() -> LkfConfig {
        LkfConfig::new(-1.0, 0.9 * (-0.1f64).exp(), 1.0).unwrap()
    }

    #[test]
    fn lkf_examples() {
        let cfg = LkfConfig::new(-1.0, 0.5, 1.0).unwrap();
        let zero = HistoryBuffer::from_samples(1, 0.01, 0.0, &[0.0; 101]).unwrap();
        assert_eq!(lkf_value(&zero, &cfg).unwrap(), 0.0);
        let c = 1.7;
        let constant = HistoryBuffer::from_samples(1, 0.01, 0.0, &[c; 101]).unwrap();
        assert!((lkf_value(&constant, &cfg).unwrap() - 1.5 * c * c).abs() < 1e-12);

        let cfg = LkfConfig::new(-2.0, -1.0, 1.0).unwrap();
        let h = 1e-3;
        let samples: Vec<f64> = (0..=1000).map(|i| (-1.0 + i as f64 * h).exp()).collect();
        let buf = HistoryBuffer::from_samples(1, h, 0.0, &samples).unwrap();
        let expected = 1.0 + (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((expected - 1.43233).abs() < 1e-5);
        assert!((lkf_value(&buf, &cfg).unwrap() - expected).abs() < 1e-6);

        let short = HistoryBuffer::from_samples(1, 0.01, 0.0, &[1.0; 50]).unwrap();
        assert!(lkf_value(&short, &LkfConfig::new(-1.0, 0.5, 1.0).unwrap()).is_err());
    }

    #[test]
    fn lkf_config_requires_margin() {
        assert!(LkfConfig::new(-1.0, 1.0, 1.0).is_err());
        assert!(LkfConfig::new(-0.5, 0.6, 1.0).is_err());
    }

    #[test]
    fn critical_eps_examples() {
        let e1 = iss_epsilon_critical(-1.0, 0.9 * (-0.1f64).exp()).unwrap();
        let e2 = iss_epsilon_critical(-0.5, 0.4 * (-0.1f64).exp()).unwrap();
        assert!((e1 - 2.693).abs() < 1e-3);
        assert!((e2 - 3.622).abs() < 1e-3);
        assert_eq!(iss_epsilon_critical(-1.0, 0.0).unwrap(), 0.5);
        assert!(matches!(iss_epsilon_critical(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn driver_derivative_examples() {
        assert_eq!(driver_derivative_numeric(&[2.0, 2.0, 2.0], 1, 0.1).unwrap(), 0.0);
        let h = 0.25;
        let ramp: Vec<f64> = (0..5).map(|i| i as f64 * h).collect();
        assert!((driver_derivative_numeric(&ramp, 2, h).unwrap() - 1.0).abs() < 1e-15);
        let h = 1e-3;
        let v: Vec<f64> = (0..3).map(|i| (-(i as f64) * h).exp()).collect();
        assert!((driver_derivative_numeric(&v, 0, h).unwrap() + 1.0).abs() < 1e-3);
        assert!(driver_derivative_numeric(&v, 2, h).is_err());
    }

    #[test]
    fn sandwich_holds_along_trajectories() {
        let cfg = config1();
        let init = InitialCondition::scalar_fn(|s| (3.0 * s).cos());
        let u = TrigPolynomial::cosine(7.0, 0.8);
        let tr = integrate(&cfg.dynamics().unwrap(), &init, &u, 20.0, 0.01, 0).unwrap();
        let v = lkf_series(&init, &tr, &cfg).unwrap();
        let (ext, lag) = extended_samples(&init, &tr, cfg.tau).unwrap();
        for i in 0..tr.len() {
            let x = ext[i + lag];
            let sup = ext[i..=i + lag].iter().fold(0.0, |m: f64, y| m.max(y * y));
            assert!(x * x <= v[i] + 1e-15);
            assert!(v[i] <= cfg.sandwich_constant() * sup + 1e-12);
        }
    }

    #[test]
    fn series_matches_buffer_evaluation() {
        let cfg = config1();
        let init = InitialCondition::scalar(1.0);
        let tr = integrate(&cfg.dynamics().unwrap(), &init, &ConstantSignal(0.3), 5.0, 0.01, 0).unwrap();
        let v = lkf_series(&init, &tr, &cfg).unwrap();
        let (ext, lag) = extended_samples(&init, &tr, cfg.tau).unwrap();
        let i = 321;
        let buf = HistoryBuffer::from_samples(1, 0.01, tr.time(i), &ext[i..=i + lag]).unwrap();
        assert!((lkf_value(&buf, &cfg).unwrap() - v[i]).abs() < 1e-12);
    }

    #[test]
    fn zero_run_is_trivially_dissipative() {
        let r = verify_dissipation(&config1(), &ConstantSignal(0.0), &InitialCondition::scalar(0.0), 3.0, 10.0, 1e-2)
            .unwrap();
        assert_eq!(r.dissipation_violations, 0);
        assert_eq!(r.worst_residual, 0.0);
    }

    #[test]
    fn config1_free_response_dissipates() {
        let r = verify_dissipation(&config1(), &ConstantSignal(0.0), &InitialCondition::scalar(1.0), 3.0, 30.0, 1e-3)
            .unwrap();
        assert_eq!(r.dissipation_violations, 0);
        assert_eq!(r.gronwall_violations, 0);
        assert!((r.eps_star - 2.693).abs() < 1e-3);
    }

    #[test]
    fn eps_below_critical_is_rejected() {
        let r = verify_dissipation(&config1(), &ConstantSignal(0.0), &InitialCondition::scalar(1.0), 2.0, 1.0, 1e-2);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn eps_tightens_state_coefficient() {
        let cfg = config1();
        let init = InitialCondition::scalar(0.5);
        let tr = integrate(&cfg.dynamics().unwrap(), &init, &ConstantSignal(0.0), 20.0, 1e-2, 0).unwrap();
        let mut last_coeff = f64::INFINITY;
        let mut last_residual = f64::NEG_INFINITY;
        for eps in [2.8, 3.0, 4.0, 8.0, 20.0] {
            let r = dissipation_on_trajectory(&cfg, &ConstantSignal(0.0), &init, &tr, eps).unwrap();
            assert!(r.state_coefficient < last_coeff);
            // with u = 0 the bound only tightens as eps grows
            assert!(r.worst_residual >= last_residual - 1e-12);
            assert_eq!(r.dissipation_violations, 0);
            last_coeff = r.state_coefficient;
            last_residual = r.worst_residual;
        }
    }

    #[test]
    fn random_input_dissipates_for_all_valid_eps() {
        let cfg = config1();
        let init = InitialCondition::scalar(0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = TrigPolynomial::random(5, 10.0, &mut rng);
        let tr = integrate(&cfg.dynamics().unwrap(), &init, &u, 30.0, 1e-2, 0).unwrap();
        for eps in [2.7, 3.0, 4.0, 8.0, 20.0] {
            let r = dissipation_on_trajectory(&cfg, &u, &init, &tr, eps).unwrap();
            assert_eq!(r.dissipation_violations, 0, "eps {eps}");
            assert_eq!(r.gronwall_violations, 0, "eps {eps}");
        }
    }

    #[test]
    fn identical_runs_are_trivial() {
        let d = config1().dynamics().unwrap();
        let u = ConstantSignal(0.4);
        let phi = InitialCondition::scalar(1.0);
        let r = verify_delta_iss(&d, &u, &u, &phi, &phi, 20.0, 0.01).unwrap();
        assert!(r.trivially_satisfied);
    }

    #[test]
    fn fading_memory_rate_matches_abscissa() {
        let d = config1().dynamics().unwrap();
        let u = ConstantSignal(0.0);
        let r = verify_delta_iss(&d, &u, &u, &InitialCondition::scalar(1.0), &InitialCondition::scalar(0.0), 100.0, 0.01)
            .unwrap();
        let rate = r.decay_exponent.unwrap();
        assert!((rate + 0.1).abs() < 0.02, "rate {rate}");
        assert!(r.gamma_slope.is_none());
        // windowed sup decays monotonically after the transient
        let sup = windowed_sup(&r.difference, 1.0);
        let start = r.difference.index_of(10.0).unwrap();
        assert!(sup[start..].windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn gamma_slope_is_offset_independent() {
        let d = config1().dynamics().unwrap();
        let u = TrigPolynomial::cosine(5.0, 1.0);
        let phi = InitialCondition::scalar(0.2);
        let mut slopes = Vec::new();
        for c in [1e-3, 1e-2, 1e-1] {
            let v = TrigPolynomial {
                constant: c,
                ..u.clone()
            };
            let r = verify_delta_iss(&d, &u, &v, &phi, &phi, 50.0, 0.01).unwrap();
            slopes.push(r.gamma_slope.unwrap());
        }
        assert!(slopes.iter().all(|s| s.is_finite()));
        assert!((slopes[0] - slopes[2]).abs() < 1e-8 * slopes[0]);
    }
}
