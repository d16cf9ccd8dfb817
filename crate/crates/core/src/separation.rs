//! Separation analysis for linear delay reservoirs.
//!
//! For `x' = a0 x + sum_j a_j x(t - tau_j) + u`, the difference `z` of two
//! responses sharing an initial history is the zero-history response to
//! `w = u - v`. Writing `w = sum_k alpha_k e^{i omega_k t}` on `[0, t1]`
//! with `omega_k = 2 pi k / t1`, the periodic part of `z` has coefficients
//! `beta_k` with `|beta_k|^2 = |alpha_k|^2 / Delta_k`, where
//! `Delta_k = |i omega_k - a0 - sum_j a_j e^{-i omega_k tau_j}|^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dde::{integrate, trajectory_segment_norm, DelayDynamics, InitialCondition, Norm};
use crate::error::{Error, Result};
use crate::signal::{Difference, Signal};

/// `constant + sum_k cos[k-1] cos(2 pi k t / period) + sin[k-1] sin(...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub period: f64,
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    pub fn cosine(period: f64, amplitude: f64) -> Self {
        Self {
            period,
            constant: 0.0,
            cos: vec![amplitude],
            sin: vec![0.0],
        }
    }

    /// Coefficients drawn uniformly from [-1, 1] for harmonics `1..=degree`
    /// and the constant term.
    pub fn random(degree: usize, period: f64, rng: &mut impl Rng) -> Self {
        let mut draw = || rng.random_range(-1.0..=1.0);
        Self {
            period,
            constant: draw(),
            cos: (0..degree).map(|_| draw()).collect(),
            sin: (0..degree).map(|_| draw()).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            period: self.period,
            constant: self.constant * factor,
            cos: self.cos.iter().map(|c| c * factor).collect(),
            sin: self.sin.iter().map(|c| c * factor).collect(),
        }
    }

    /// Mean square over one period.
    pub fn mean_square(&self) -> f64 {
        let harmonics: f64 = self.cos.iter().chain(&self.sin).map(|c| c * c).sum();
        self.constant * self.constant + 0.5 * harmonics
    }

    /// Exponential coefficient of `e^{2 pi i k t / period}`.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        if k == 0 {
            return Complex64::new(self.constant, 0.0);
        }
        let idx = k.unsigned_abs() as usize - 1;
        let a = self.cos.get(idx).copied().unwrap_or(0.0);
        let b = self.sin.get(idx).copied().unwrap_or(0.0);
        let c = Complex64::new(0.5 * a, -0.5 * b);
        if k > 0 {
            c
        } else {
            c.conj()
        }
    }
}

impl Signal for TrigPolynomial {
    fn eval(&self, t: f64) -> f64 {
        let base = 2.0 * PI * t / self.period;
        let mut acc = self.constant;
        for (k, c) in self.cos.iter().enumerate() {
            acc += c * ((k + 1) as f64 * base).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            acc += s * ((k + 1) as f64 * base).sin();
        }
        acc
    }
}

/// `L2([t_a, t_b])` distance between two signals, trapezoidal rule with
/// step `dt` (using left limits at the right endpoint).
pub fn signal_l2_distance(u: &dyn Signal, v: &dyn Signal, t_a: f64, t_b: f64, dt: f64) -> Result<f64> {
    if !(t_a < t_b) || !(dt > 0.0) {
        return Err(Error::Contract(format!(
            "invalid quadrature on [{t_a}, {t_b}] with dt = {dt}"
        )));
    }
    let n = ((t_b - t_a) / dt).round().max(1.0) as usize;
    let h = (t_b - t_a) / n as f64;
    let sq = |t: f64| (u.eval(t) - v.eval(t)).powi(2);
    let ends = 0.5 * (sq(t_a) + (u.eval_left(t_b) - v.eval_left(t_b)).powi(2));
    let inner: f64 = (1..n).map(|i| sq(t_a + i as f64 * h)).sum();
    Ok((h * (ends + inner)).sqrt())
}

fn require_noise_free(dynamics: &DelayDynamics) -> Result<()> {
    if dynamics.noise_std() > 0.0 {
        return Err(Error::Contract(
            "separation measures require noise-free dynamics".into(),
        ));
    }
    Ok(())
}

/// `|| x^u(phi) - x^v(phi) ||_{L2([t0, t1])}`.
pub fn pairwise_separation(
    dynamics: &DelayDynamics,
    init: &InitialCondition,
    u: &dyn Signal,
    v: &dyn Signal,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<f64> {
    if !(t0 < t1) {
        return Err(Error::Contract(format!("empty window [{t0}, {t1}]")));
    }
    require_noise_free(dynamics)?;
    let xu = integrate(dynamics, init, u, t1, dt, 0)?;
    let xv = integrate(dynamics, init, v, t1, dt, 0)?;
    trajectory_segment_norm(&xu.difference(&xv)?, t0, t1, Norm::L2)
}

/// Mean separation over the accepted input pairs and initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedSeparation {
    pub mean: f64,
    pub accepted: usize,
    /// Index and measured `||u - v||` of pairs outside `d +/- delta`.
    pub rejected: Vec<(usize, f64)>,
}

/// `S_{d,t0,t1}`: mean of [`pairwise_separation`] over `pairs x histories`,
/// keeping only pairs with `| ||u - v||_{L2([0, t1])} - d | <= delta`.
#[allow(clippy::too_many_arguments)]
pub fn averaged_separation<S: Signal>(
    dynamics: &DelayDynamics,
    histories: &[InitialCondition],
    pairs: &[(S, S)],
    d: f64,
    delta: f64,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<AveragedSeparation> {
    if histories.is_empty() {
        return Err(Error::Domain("no initial conditions supplied".into()));
    }
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (i, (u, v)) in pairs.iter().enumerate() {
        let dist = signal_l2_distance(u, v, 0.0, t1, dt)?;
        if (dist - d).abs() <= delta {
            accepted.push(i);
        } else {
            rejected.push((i, dist));
        }
    }
    if accepted.is_empty() {
        return Err(Error::Domain(format!(
            "no input pair lies within {delta} of distance {d}"
        )));
    }
    let mut total = 0.0;
    for &i in &accepted {
        let (u, v) = &pairs[i];
        for phi in histories {
            total += pairwise_separation(dynamics, phi, u, v, t0, t1, dt)?;
        }
    }
    Ok(AveragedSeparation {
        mean: total / (accepted.len() * histories.len()) as f64,
        accepted: accepted.len(),
        rejected,
    })
}

/// Random band-limited pairs `(u, v)` with `||u - v||_{L2([0, t1])} = d`.
/// Both signals are trigonometric polynomials of degree `degree` with period
/// `t1`.
pub fn random_input_pairs(
    count: usize,
    d: f64,
    degree: usize,
    t1: f64,
    seed: u64,
) -> Vec<(TrigPolynomial, TrigPolynomial)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u = TrigPolynomial::random(degree, t1, &mut rng);
            let w = TrigPolynomial::random(degree, t1, &mut rng);
            let w = w.scaled(d / (w.mean_square() * t1).sqrt());
            let v = TrigPolynomial {
                period: t1,
                constant: u.constant - w.constant,
                cos: u.cos.iter().zip(&w.cos).map(|(a, b)| a - b).collect(),
                sin: u.sin.iter().zip(&w.sin).map(|(a, b)| a - b).collect(),
            };
            (u, v)
        })
        .collect()
}

/// Exponential Fourier coefficients `alpha_{-kmax..=kmax}` on `[0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierExpansion {
    pub t1: f64,
    pub kmax: usize,
    coeffs: Vec<Complex64>,
    /// `(1/t1) int_0^{t1} |w|^2`, same quadrature as the coefficients.
    pub mean_square: f64,
}

impl FourierExpansion {
    pub fn new(t1: f64, coeffs: Vec<Complex64>, mean_square: f64) -> Result<Self> {
        if coeffs.len() % 2 != 1 {
            return Err(Error::Contract("coefficients must cover -kmax..=kmax".into()));
        }
        Ok(Self {
            t1,
            kmax: coeffs.len() / 2,
            coeffs,
            mean_square,
        })
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.kmax {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(k + self.kmax as i64) as usize]
    }

    /// `(k, alpha_k)` for `k = -kmax..=kmax`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let kmax = self.kmax as i64;
        (-kmax..=kmax).zip(self.coeffs.iter().copied())
    }

    /// `|alpha_k|^2` for `k = -kmax..=kmax`.
    pub fn power(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn conjugate_symmetry_error(&self) -> f64 {
        (1..=self.kmax as i64)
            .map(|k| (self.coeff(-k) - self.coeff(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Energy not captured by the retained modes (Parseval remainder).
    pub fn tail_power(&self) -> f64 {
        (self.mean_square - self.power().iter().sum::<f64>()).max(0.0)
    }
}

/// `alpha_k = (1/t1) int_0^{t1} w(t) e^{-2 i k pi t / t1} dt` by the
/// trapezoidal rule on `n_quad` equal subintervals.
pub fn fourier_coeffs(w: &dyn Signal, t1: f64, kmax: usize, n_quad: usize) -> Result<FourierExpansion> {
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(Error::Contract(format!("window t1 = {t1} must be positive")));
    }
    if n_quad < 4 * kmax || n_quad == 0 {
        return Err(Error::Config(format!(
            "{n_quad} quadrature intervals alias modes up to {kmax}; need at least {}",
            (4 * kmax).max(1)
        )));
    }
    let h = t1 / n_quad as f64;
    let samples: Vec<(f64, f64)> = (0..=n_quad)
        .map(|m| {
            let t = m as f64 * h;
            let value = if m == n_quad { w.eval_left(t1) } else { w.eval(t) };
            let weight = if m == 0 || m == n_quad { 0.5 } else { 1.0 };
            (value, weight)
        })
        .collect();
    let mean_square = samples.iter().map(|(v, wt)| wt * v * v).sum::<f64>() / n_quad as f64;
    let kmax_i = kmax as i64;
    let coeffs = (-kmax_i..=kmax_i)
        .map(|k| {
            let sum: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(m, (v, wt))| {
                    let phase = -2.0 * PI * (k * m as i64).rem_euclid(n_quad as i64) as f64
                        / n_quad as f64;
                    Complex64::from_polar(wt * v, phase)
                })
                .sum();
            sum / n_quad as f64
        })
        .collect();
    FourierExpansion::new(t1, coeffs, mean_square)
}

/// `(a0 + sum_j a_j cos(omega_k tau_j))^2 + (omega_k + sum_j a_j sin(omega_k tau_j))^2`
/// with `omega_k = 2 pi k / t1`.
pub fn delta_k(a0: f64, delayed: &[(f64, f64)], t1: f64, k: i64) -> f64 {
    let omega = 2.0 * PI * k as f64 / t1;
    let (mut re, mut im) = (a0, omega);
    for &(a, tau) in delayed {
        re += a * (omega * tau).cos();
        im += a * (omega * tau).sin();
    }
    re * re + im * im
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// `(k, Delta_k)` for `k = -kmax..=kmax`.
    pub delta_k: Vec<(i64, f64)>,
    /// `sum_k |alpha_k|^2 / Delta_k` over the retained modes.
    pub weighted_power: f64,
    pub bound_value: f64,
    /// Brute-force `int_{t0}^{t1} |z|^2`, when measured.
    pub empirical_energy: Option<f64>,
    /// `(k0, in_band, out_band)` partial sums of `|alpha_k|^2 / Delta_k`.
    pub band_split: (usize, f64, f64),
    /// `M1 e^{(s0 + eps) t0}`.
    pub transient_margin: f64,
    /// Estimate of the neglected `sum_{|k| > kmax} |alpha_k|^2 / Delta_k`.
    pub truncation_estimate: f64,
}

/// Lower bound
/// `int_{t0}^{t1} |z|^2 >= (t1 - t0) (sum_k |alpha_k|^2 / Delta_k - M1 e^{(s0 + eps) t0})`.
/// With `m1 = 0` this is the transient-free separation metric.
#[allow(clippy::too_many_arguments)]
pub fn separation_lower_bound(
    expansion: &FourierExpansion,
    a0: f64,
    delayed: &[(f64, f64)],
    t0: f64,
    t1: f64,
    s0: f64,
    eps: f64,
    m1: f64,
    k0: usize,
) -> Result<SeparationReport> {
    if !(s0 < 0.0) {
        return Err(Error::Domain(format!(
            "free system is not asymptotically stable (s0 = {s0})"
        )));
    }
    if !(eps > 0.0 && s0 + eps < 0.0) {
        return Err(Error::Domain(format!(
            "eps = {eps} must satisfy 0 < eps < -s0 = {}",
            -s0
        )));
    }
    if !(m1 >= 0.0) {
        return Err(Error::Contract(format!("M1 = {m1} must be nonnegative")));
    }
    if !(0.0 <= t0 && t0 < t1) {
        return Err(Error::Contract(format!("need 0 <= t0 < t1, got [{t0}, {t1}]")));
    }
    let kmax = expansion.kmax;
    let delta: Vec<(i64, f64)> = (-(kmax as i64)..=kmax as i64)
        .map(|k| (k, delta_k(a0, delayed, expansion.t1, k)))
        .collect();
    if let Some((k, d)) = delta.iter().find(|(_, d)| !(*d > 0.0)) {
        return Err(Error::Domain(format!("Delta_{k} = {d} is not positive")));
    }
    let weights = expansion.power();
    let (in_band, out_band) = band_separation_objective(a0, delayed, expansion.t1, k0.min(kmax), kmax, &weights)?;
    let weighted_power = in_band + out_band;
    let transient_margin = m1 * ((s0 + eps) * t0).exp();
    let omega_next = 2.0 * PI * (kmax + 1) as f64 / expansion.t1;
    Ok(SeparationReport {
        delta_k: delta,
        weighted_power,
        bound_value: (t1 - t0) * (weighted_power - transient_margin),
        empirical_energy: None,
        band_split: (k0, in_band, out_band),
        transient_margin,
        truncation_estimate: expansion.tail_power() / (omega_next * omega_next),
    })
}

/// `(sum_{|k| <= k0}, sum_{k0 < |k| <= kmax})` of `weights[k] / Delta_k`;
/// `weights` is indexed `-kmax..=kmax`.
pub fn band_separation_objective(
    a0: f64,
    delayed: &[(f64, f64)],
    t1: f64,
    k0: usize,
    kmax: usize,
    weights: &[f64],
) -> Result<(f64, f64)> {
    if k0 > kmax {
        return Err(Error::Contract(format!("k0 = {k0} exceeds kmax = {kmax}")));
    }
    if weights.len() != 2 * kmax + 1 {
        return Err(Error::Contract(format!(
            "{} weights for modes -{kmax}..={kmax}",
            weights.len()
        )));
    }
    let mut in_band = 0.0;
    let mut out_band = 0.0;
    for (idx, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let k = idx as i64 - kmax as i64;
        let term = w / delta_k(a0, delayed, t1, k);
        if k.unsigned_abs() as usize <= k0 {
            in_band += term;
        } else {
            out_band += term;
        }
    }
    Ok((in_band, out_band))
}

/// `int_{t0}^{t1} |z|^2` for the zero-history response `z` to `w`.
pub fn brute_force_energy(dynamics: &DelayDynamics, w: &dyn Signal, t0: f64, t1: f64, dt: f64) -> Result<f64> {
    require_noise_free(dynamics)?;
    let z = integrate(dynamics, &InitialCondition::zero(dynamics.dim()), w, t1, dt, 0)?;
    Ok(trajectory_segment_norm(&z, t0, t1, Norm::L2)?.powi(2))
}

/// Fills `empirical_energy` of `report` for the difference input `u - v`.
pub fn measure_energy(
    report: &mut SeparationReport,
    dynamics: &DelayDynamics,
    u: &dyn Signal,
    v: &dyn Signal,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<f64> {
    let e = brute_force_energy(dynamics, &Difference(u, v), t0, t1, dt)?;
    report.empirical_energy = Some(e);
    Ok(e)
}

/// Default transient constant `M1`: the empirical envelope constant times a
/// factor 3 covering the cross terms.
pub fn default_transient_constant(envelope: f64) -> f64 {
    3.0 * envelope
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ConstantSignal, FnSignal};
    use proptest::prelude::*;

    fn config1() -> (f64, f64) {
        (-1.0, 0.9 * (-0.1f64).exp())
    }

    fn config2() -> (f64, f64) {
        (-0.5, 0.4 * (-0.1f64).exp())
    }

    // independent complex-arithmetic route for Delta_k
    fn delta_oracle(a0: f64, delayed: &[(f64, f64)], t1: f64, k: i64) -> f64 {
        let omega = 2.0 * PI * k as f64 / t1;
        let mut c = Complex64::new(-a0, omega);
        for &(a, tau) in delayed {
            c -= a * Complex64::new(0.0, -omega * tau).exp();
        }
        c.norm_sqr()
    }

    #[test]
    fn delta_examples() {
        let (a0, a1) = config1();
        let d0 = delta_k(a0, &[(a1, 1.0)], 20.0, 0);
        assert!((d0 - 0.185646f64.powi(2)).abs() < 1e-6);
        assert!((delta_k(a0, &[(a1, 1.0)], 20.0, 1) - 0.370991).abs() < 1e-5);
        let (b0, b1) = config2();
        let d2 = delta_k(b0, &[(b1, 1.0)], 20.0, 1);
        assert!((d2 - 0.205746).abs() < 1e-5);
        let ratio = delta_k(a0, &[(a1, 1.0)], 20.0, 1) / d2;
        assert!((ratio - 1.80).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn delta_matches_complex_route(
            a0 in -3.0f64..1.0,
            a1 in -2.0f64..2.0,
            a2 in -2.0f64..2.0,
            tau1 in 0.1f64..3.0,
            tau2 in 0.1f64..3.0,
            t1 in 1.0f64..100.0,
            k in -50i64..50,
        ) {
            let delayed = [(a1, tau1), (a2, tau2)];
            let d = delta_k(a0, &delayed, t1, k);
            let o = delta_oracle(a0, &delayed, t1, k);
            prop_assert!((d - o).abs() <= 1e-12 * o.max(1e-300) + 1e-15);
        }

        #[test]
        fn trig_polynomials_round_trip(seed in 0u64..1000, degree in 0usize..=10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t1 = 20.0;
            let p = TrigPolynomial::random(degree, t1, &mut rng);
            let kmax = 12;
            let e = fourier_coeffs(&p, t1, kmax, 4 * kmax).unwrap();
            for k in -(kmax as i64)..=kmax as i64 {
                prop_assert!((e.coeff(k) - p.coefficient(k)).norm() < 1e-10);
            }
            prop_assert!(e.conjugate_symmetry_error() < 1e-10);
            prop_assert!((e.mean_square - p.mean_square()).abs() < 1e-10);
        }
    }

    #[test]
    fn fourier_of_constant_and_cosine() {
        let e = fourier_coeffs(&ConstantSignal(1.7), 5.0, 6, 64).unwrap();
        assert!((e.coeff(0) - Complex64::new(1.7, 0.0)).norm() < 1e-12);
        assert!(e.iter().filter(|(k, _)| *k != 0).all(|(_, c)| c.norm() < 1e-12));
        let cosine = TrigPolynomial::cosine(20.0, 1.0);
        let e = fourier_coeffs(&cosine, 20.0, 8, 64).unwrap();
        assert!((e.coeff(1) - Complex64::new(0.5, 0.0)).norm() < 1e-10);
        assert!((e.coeff(-1) - Complex64::new(0.5, 0.0)).norm() < 1e-10);
        assert!(e.iter().filter(|(k, _)| k.abs() != 1).all(|(_, c)| c.norm() < 1e-10));
    }

    #[test]
    fn fourier_aliasing_guard() {
        assert!(matches!(
            fourier_coeffs(&ConstantSignal(1.0), 1.0, 10, 39),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn parseval_with_truncation() {
        // square wave: modes beyond kmax carry the missing energy
        let sq = FnSignal(|t: f64| if (t % 2.0) < 1.0 { 1.0 } else { -1.0 });
        let e = fourier_coeffs(&sq, 2.0, 16, 4096).unwrap();
        let kept: f64 = e.power().iter().sum();
        assert!(kept <= e.mean_square + 1e-9);
        assert!(e.tail_power() > 0.0 && e.tail_power() < 0.05);
    }

    #[test]
    fn bound_examples() {
        let (a0, a1) = config1();
        let zero = FourierExpansion::new(20.0, vec![Complex64::new(0.0, 0.0); 5], 0.0).unwrap();
        let r = separation_lower_bound(&zero, a0, &[(a1, 1.0)], 0.0, 20.0, -0.1, 0.05, 0.0, 2).unwrap();
        assert_eq!(r.bound_value, 0.0);

        let e = fourier_coeffs(&TrigPolynomial::cosine(20.0, 1.0), 20.0, 8, 64).unwrap();
        let r = separation_lower_bound(&e, a0, &[(a1, 1.0)], 0.0, 20.0, -0.1, 0.05, 0.0, 8).unwrap();
        let expected = 20.0 * 2.0 * 0.25 / delta_k(a0, &[(a1, 1.0)], 20.0, 1);
        assert!((r.bound_value - expected).abs() < 1e-8);
        assert!((r.bound_value - 26.95).abs() < 0.01);
        assert_eq!(r.band_split.2, r.weighted_power - r.band_split.1);
    }

    #[test]
    fn bound_requires_stability() {
        let e = fourier_coeffs(&ConstantSignal(1.0), 20.0, 2, 16).unwrap();
        assert!(matches!(
            separation_lower_bound(&e, 0.5, &[], 0.0, 20.0, 0.5, 0.1, 0.0, 1),
            Err(Error::Domain(_))
        ));
        assert!(separation_lower_bound(&e, -1.0, &[], 0.0, 20.0, -1.0, 1.5, 0.0, 1).is_err());
    }

    #[test]
    fn band_objective_examples() {
        let (a0, a1) = config1();
        let w = vec![1.0; 21];
        let (_, out) = band_separation_objective(a0, &[(a1, 1.0)], 20.0, 10, 10, &w).unwrap();
        assert_eq!(out, 0.0);
        let zero = vec![0.0; 21];
        assert_eq!(band_separation_objective(a0, &[(a1, 1.0)], 20.0, 3, 10, &zero).unwrap(), (0.0, 0.0));
        let (b0, b1) = config2();
        let (in1, _) = band_separation_objective(a0, &[(a1, 1.0)], 20.0, 10, 10, &w).unwrap();
        let (in2, _) = band_separation_objective(b0, &[(b1, 1.0)], 20.0, 10, 10, &w).unwrap();
        assert!((in2 / in1 - 1.8).abs() < 0.1, "ratio {}", in2 / in1);
        assert!(band_separation_objective(a0, &[(a1, 1.0)], 20.0, 11, 10, &w).is_err());
    }

    #[test]
    fn separation_of_identical_inputs_is_zero() {
        let (a0, a1) = config1();
        let d = DelayDynamics::scalar_linear(a0, a1, 1.0).unwrap();
        let u = TrigPolynomial::cosine(10.0, 1.0);
        let s = pairwise_separation(&d, &InitialCondition::scalar(0.3), &u, &u, 2.0, 10.0, 0.01).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn separation_against_zero_input_is_the_response_norm() {
        let (a0, a1) = config1();
        let d = DelayDynamics::scalar_linear(a0, a1, 1.0).unwrap();
        let u = TrigPolynomial::cosine(10.0, 1.0);
        let zero = ConstantSignal(0.0);
        let phi = InitialCondition::zero(1);
        let s = pairwise_separation(&d, &phi, &u, &zero, 2.0, 10.0, 0.01).unwrap();
        let tr = integrate(&d, &phi, &u, 10.0, 0.01, 0).unwrap();
        let direct = trajectory_segment_norm(&tr, 2.0, 10.0, Norm::L2).unwrap();
        assert!((s - direct).abs() < 1e-12);
    }

    #[test]
    fn noisy_dynamics_are_rejected() {
        let d = DelayDynamics::scalar_linear(-1.0, 0.5, 1.0).unwrap().with_noise(0.1).unwrap();
        let u = ConstantSignal(1.0);
        assert!(pairwise_separation(&d, &InitialCondition::zero(1), &u, &u, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn averaged_separation_is_a_mean() {
        let (a0, a1) = config1();
        let d = DelayDynamics::scalar_linear(a0, a1, 1.0).unwrap();
        let t1 = 10.0;
        let pairs = random_input_pairs(3, 2.0, 3, t1, 9);
        let phi = [InitialCondition::scalar(0.5)];
        for (u, v) in &pairs {
            let dist = signal_l2_distance(u, v, 0.0, t1, 0.01).unwrap();
            assert!((dist - 2.0).abs() < 1e-6);
        }
        let avg = averaged_separation(&d, &phi, &pairs, 2.0, 0.01, 1.0, t1, 0.01).unwrap();
        let manual: f64 = pairs
            .iter()
            .map(|(u, v)| pairwise_separation(&d, &phi[0], u, v, 1.0, t1, 0.01).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((avg.mean - manual).abs() < 1e-12);
        assert_eq!(avg.accepted, 3);

        let single = averaged_separation(&d, &phi, &pairs[..1], 2.0, 0.01, 1.0, t1, 0.01).unwrap();
        let (u, v) = &pairs[0];
        assert_eq!(single.mean, pairwise_separation(&d, &phi[0], u, v, 1.0, t1, 0.01).unwrap());

        let same = vec![(pairs[0].0.clone(), pairs[0].0.clone())];
        assert_eq!(averaged_separation(&d, &phi, &same, 0.0, 0.1, 1.0, t1, 0.01).unwrap().mean, 0.0);

        let err = averaged_separation(&d, &phi, &pairs, 5.0, 0.1, 1.0, t1, 0.01);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn high_frequencies_are_attenuated() {
        let (a0, a1) = config1();
        let mut last = 0.0;
        for k in [10, 100, 1000, 10000] {
            let d = delta_k(a0, &[(a1, 1.0)], 20.0, k);
            assert!(d > last);
            last = d;
        }
        assert!(1.0 / last < 1e-5);
    }
}
