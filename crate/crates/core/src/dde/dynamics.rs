use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar nonlinearity applied to the delayed-plus-input drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Identity,
    /// `g(s) = sign(s) ln(1 + |s|)`.
    LogSign,
    Tanh,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Nonlinearity::Identity => s,
            Nonlinearity::LogSign => s.signum() * s.abs().ln_1p(),
            Nonlinearity::Tanh => s.tanh(),
        }
    }
}

/// One delayed term `A_j x(t - tau_j)`; `coeff` is row-major `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub delay: f64,
    pub coeff: Vec<f64>,
}

/// Right-hand side of
///
/// ```text
/// x'(t) = A0 x(t) + g( sum_j A_j x(t - tau_j) + b u(t) ) + xi(t)
/// ```
///
/// With `g = identity` this is the linear multi-delay system; with a scalar
/// `A0 = -1`, `A1 = 1`, `tau = 1` and `g = log_sign` it is the logarithmic
/// reservoir `x' = -x + g(x(t-1) + u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDynamics {
    dim: usize,
    a0: Vec<f64>,
    terms: Vec<DelayTerm>,
    nonlinearity: Nonlinearity,
    input_map: Vec<f64>,
    noise_std: f64,
}

impl DelayDynamics {
    /// Builds a system of dimension `dim`. Delay terms are sorted by delay;
    /// delays must be positive, finite and pairwise distinct.
    pub fn new(
        dim: usize,
        a0: Vec<f64>,
        mut terms: Vec<DelayTerm>,
        nonlinearity: Nonlinearity,
        input_map: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if a0.len() != dim * dim {
            return Err(Error::Config(format!(
                "A0 has {} entries, expected {}",
                a0.len(),
                dim * dim
            )));
        }
        if input_map.len() != dim {
            return Err(Error::Config(format!(
                "input map has {} entries, expected {dim}",
                input_map.len()
            )));
        }
        for t in &terms {
            if !(t.delay.is_finite() && t.delay > 0.0) {
                return Err(Error::Config(format!("delay {} must be positive", t.delay)));
            }
            if t.coeff.len() != dim * dim {
                return Err(Error::Config(format!(
                    "delay coefficient for tau = {} has {} entries, expected {}",
                    t.delay,
                    t.coeff.len(),
                    dim * dim
                )));
            }
        }
        terms.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        if terms.windows(2).any(|w| w[0].delay == w[1].delay) {
            return Err(Error::Config("delays must be pairwise distinct".into()));
        }
        let all_finite = a0.iter().chain(&input_map).all(|v| v.is_finite())
            && terms.iter().all(|t| t.coeff.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::Config("non-finite coefficient".into()));
        }
        Ok(Self {
            dim,
            a0,
            terms,
            nonlinearity,
            input_map,
            noise_std: 0.0,
        })
    }

    /// `x' = a0 x + sum_j a_j x(t - tau_j) + u`.
    pub fn scalar(a0: f64, delayed: &[(f64, f64)]) -> Result<Self> {
        let terms = delayed
            .iter()
            .map(|&(coeff, delay)| DelayTerm {
                delay,
                coeff: vec![coeff],
            })
            .collect();
        Self::new(1, vec![a0], terms, Nonlinearity::Identity, vec![1.0])
    }

    /// `x' = a0 x + a1 x(t - tau) + u`; with `a1 == 0` the delay term is kept
    /// so the history window still spans `tau`.
    pub fn scalar_linear(a0: f64, a1: f64, tau: f64) -> Result<Self> {
        Self::scalar(a0, &[(a1, tau)])
    }

    /// `x' = -x + sign(s) ln(1 + |s|)` with `s = x(t - 1) + u(t)`.
    pub fn log_sign_reservoir() -> Self {
        Self::scalar_linear(-1.0, 1.0, 1.0)
            .expect("static parameters are valid")
            .with_nonlinearity(Nonlinearity::LogSign)
    }

    pub fn with_nonlinearity(mut self, nonlinearity: Nonlinearity) -> Self {
        self.nonlinearity = nonlinearity;
        self
    }

    pub fn with_noise(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise standard deviation {noise_std} must be nonnegative"
            )));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a0(&self) -> &[f64] {
        &self.a0
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn input_map(&self) -> &[f64] {
        &self.input_map
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.delay)
    }

    /// Scalar linear parameters `(a0, [(a_j, tau_j)])` for the analysis
    /// modules. Fails for vector or nonlinear systems.
    pub fn scalar_params(&self) -> Result<(f64, Vec<(f64, f64)>)> {
        if self.dim != 1 {
            return Err(Error::Unsupported(format!(
                "analysis requires scalar dynamics, got dimension {}",
                self.dim
            )));
        }
        if self.nonlinearity != Nonlinearity::Identity {
            return Err(Error::Unsupported(
                "analysis requires linear (identity) dynamics".into(),
            ));
        }
        Ok((
            self.a0[0],
            self.terms.iter().map(|t| (t.coeff[0], t.delay)).collect(),
        ))
    }

    /// Unchecked right-hand side; `delayed` holds one state per delay term,
    /// concatenated. Noise is not included.
    pub(crate) fn rhs_into(&self, x: &[f64], delayed: &[f64], u: f64, out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let mut drive = self.input_map[i] * u;
            for (j, term) in self.terms.iter().enumerate() {
                let row = &term.coeff[i * n..(i + 1) * n];
                let xd = &delayed[j * n..(j + 1) * n];
                drive += row.iter().zip(xd).map(|(a, b)| a * b).sum::<f64>();
            }
            let row = &self.a0[i * n..(i + 1) * n];
            let inst: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            out[i] = inst + self.nonlinearity.apply(drive);
        }
    }
}

/// Evaluates the noise-free right-hand side at one instant.
pub fn evaluate_rhs(
    dynamics: &DelayDynamics,
    x_now: &[f64],
    delayed: &[Vec<f64>],
    u: f64,
) -> Result<Vec<f64>> {
    let n = dynamics.dim;
    if x_now.len() != n {
        return Err(Error::Contract(format!(
            "state has length {}, expected {n}",
            x_now.len()
        )));
    }
    if delayed.len() != dynamics.terms.len() {
        return Err(Error::Contract(format!(
            "{} delayed states supplied for {} delay terms",
            delayed.len(),
            dynamics.terms.len()
        )));
    }
    if let Some(bad) = delayed.iter().find(|d| d.len() != n) {
        return Err(Error::Contract(format!(
            "delayed state has length {}, expected {n}",
            bad.len()
        )));
    }
    let flat: Vec<f64> = delayed.iter().flatten().copied().collect();
    let mut out = vec![0.0; n];
    dynamics.rhs_into(x_now, &flat, u, &mut out);
    Ok(out)
}
