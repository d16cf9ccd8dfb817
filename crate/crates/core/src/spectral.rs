//! Characteristic roots of scalar linear delay equations.
//!
//! For `x' = a0 x + a1 x(t - tau)` the characteristic equation
//! `z - a0 - a1 e^{-z tau} = 0` is solved in closed form by
//! `z_k = a0 + W_k(a1 tau e^{-a0 tau}) / tau`, where `W_k` is the k-th branch
//! of the Lambert W function.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::dde::Trajectory;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;

/// Branch `branch` of the Lambert W function (Corless et al. convention).
///
/// Halley iteration from a branch-specific starting point: the branch-point
/// series near `-1/e`, `ln(1 + x)` for small arguments on the principal
/// branch and the two-term asymptotic expansion `L - ln L` with
/// `L = ln x + 2 pi i k` elsewhere.
pub fn lambert_w(branch: i32, x: Complex64) -> Result<Complex64> {
    if !(x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::Domain(format!("Lambert W of non-finite argument {x}")));
    }
    if x == Complex64::new(0.0, 0.0) {
        return if branch == 0 {
            Ok(x)
        } else {
            Err(Error::Domain(format!("W_{branch}(0) is singular")))
        };
    }
    let branch_point = Complex64::new(-1.0 / E, 0.0);
    let real_principal = branch == 0 && x.im == 0.0 && x.re >= -1.0 / E;
    let real_lower = branch == -1 && x.im == 0.0 && (-1.0 / E..0.0).contains(&x.re);
    if (x - branch_point).norm() < 1e-15 && (branch == 0 || branch == -1) {
        return Ok(Complex64::new(-1.0, 0.0));
    }

    let mut w = initial_guess(branch, x);
    if real_principal || real_lower {
        w.im = 0.0;
    }
    let mut last_step = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom.norm() == 0.0 || !denom.re.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        last_step = step.norm();
        if last_step <= 4.0 * f64::EPSILON * (1.0 + w.norm()) {
            if real_principal || real_lower {
                w.im = 0.0;
            }
            return Ok(w);
        }
    }
    let residual = (w * w.exp() - x).norm();
    if residual <= 1e-12 * (1.0 + x.norm()) {
        return Ok(w);
    }
    Err(Error::Numerical(format!(
        "Lambert W_{branch}({x}) did not converge in {MAX_ITERATIONS} iterations \
         (last iterate {w}, last step {last_step:e}, residual {residual:e})"
    )))
}

fn initial_guess(branch: i32, x: Complex64) -> Complex64 {
    // real arguments left of -1/e need a complex start on the principal pair
    let near_branch_point =
        (x + 1.0 / E).norm() < 0.3 || (x.im == 0.0 && x.re < -1.0 / E && x.re > -3.0);
    if near_branch_point && branch == 0 {
        let p = (2.0 * (E * x + 1.0)).sqrt();
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    }
    if near_branch_point && ((branch == -1 && x.im >= 0.0) || (branch == 1 && x.im < 0.0)) {
        let p = -(2.0 * (E * x + 1.0)).sqrt();
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    }
    if branch == 0 && x.norm() < 3.0 {
        return (1.0 + x).ln();
    }
    let l1 = x.ln() + Complex64::new(0.0, 2.0 * PI * branch as f64);
    l1 - l1.ln()
}

/// `|z - a0 - sum_j a_j e^{-z tau_j}|`.
pub fn characteristic_residual(a0: f64, delayed: &[(f64, f64)], z: Complex64) -> f64 {
    let sum: Complex64 = delayed
        .iter()
        .map(|&(a, tau)| a * (-z * tau).exp())
        .sum();
    (z - a0 - sum).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Spectral abscissa: largest real part among the reported roots.
    pub s0: f64,
    /// Roots with nonnegative imaginary part (conjugates removed), by
    /// decreasing real part.
    pub dominant_roots: Vec<Complex64>,
    pub branch_count: usize,
    pub residuals: Vec<f64>,
    /// The rightmost root is a complex pair.
    pub complex_dominant: bool,
}

/// Scans Lambert branches `-branches ..= branches` for
/// `x' = a0 x + a1 x(t - tau)`.
pub fn spectral_abscissa_scalar(a0: f64, a1: f64, tau: f64, branches: usize) -> Result<SpectralReport> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Contract(format!("delay tau = {tau} must be positive")));
    }
    if branches < 1 {
        return Err(Error::Contract("scan at least one branch".into()));
    }
    if a1 == 0.0 {
        return Ok(SpectralReport {
            s0: a0,
            dominant_roots: vec![Complex64::new(a0, 0.0)],
            branch_count: branches,
            residuals: vec![0.0],
            complex_dominant: false,
        });
    }
    let arg = Complex64::new(a1 * tau * (-a0 * tau).exp(), 0.0);
    let b = branches as i32;
    let mut roots: Vec<Complex64> = Vec::with_capacity(2 * branches + 1);
    for k in -b..=b {
        let z = a0 + lambert_w(k, arg)? / tau;
        let scale = 1.0 + z.norm();
        let duplicate = roots
            .iter()
            .any(|r| (r - z).norm() < 1e-9 * scale || (r.conj() - z).norm() < 1e-9 * scale);
        if !duplicate {
            roots.push(z);
        }
    }
    let mut roots: Vec<Complex64> = roots
        .into_iter()
        .map(|z| if z.im < 0.0 { z.conj() } else { z })
        .collect();
    roots.sort_by(|p, q| q.re.total_cmp(&p.re));
    let residuals = roots
        .iter()
        .map(|z| characteristic_residual(a0, &[(a1, tau)], *z))
        .collect();
    let s0 = roots[0].re;
    let complex_dominant = roots[0].im.abs() > 1e-12 * (1.0 + roots[0].norm());
    Ok(SpectralReport {
        s0,
        dominant_roots: roots,
        branch_count: branches,
        residuals,
        complex_dominant,
    })
}

/// Smallest `M` with `|x(t)| <= M e^{p t} phi_norm` on every grid point.
pub fn fit_exponential_envelope(traj: &Trajectory, p: f64, phi_norm: f64) -> Result<f64> {
    if !(phi_norm > 0.0 && phi_norm.is_finite()) {
        return Err(Error::Contract(format!(
            "history norm {phi_norm} must be positive"
        )));
    }
    Ok(traj
        .norms()
        .enumerate()
        .map(|(i, x)| x / ((p * traj.time(i)).exp() * phi_norm))
        .fold(0.0, f64::max))
}
