use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Uniform-grid record of the most recent states, covering at least
/// `[t_now - max_delay, t_now]`.
///
/// Alongside values the buffer may keep one-sided slopes at each grid point
/// (`slope_in` is the left derivative, `slope_out` the right derivative),
/// which enables cubic Hermite interpolation between grid points even when
/// the derivative jumps at a grid point. Missing slopes are stored as NaN.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dim: usize,
    grid_step: f64,
    max_delay: f64,
    t_now: f64,
    capacity: usize,
    values: VecDeque<f64>,
    slope_in: VecDeque<f64>,
    slope_out: VecDeque<f64>,
}

impl HistoryBuffer {
    /// Empty buffer. `capacity` is `ceil(max_delay / grid_step) + 2` points.
    pub fn new(dim: usize, grid_step: f64, max_delay: f64) -> Result<Self> {
        if !(grid_step.is_finite() && grid_step > 0.0) {
            return Err(Error::Config(format!("grid step {grid_step} must be positive")));
        }
        if !(max_delay.is_finite() && max_delay >= 0.0) {
            return Err(Error::Config(format!("window {max_delay} must be nonnegative")));
        }
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let capacity = (max_delay / grid_step - 1e-9).ceil().max(0.0) as usize + 2;
        Ok(Self {
            dim,
            grid_step,
            max_delay,
            t_now: f64::NAN,
            capacity,
            values: VecDeque::with_capacity(capacity * dim),
            slope_in: VecDeque::with_capacity(capacity * dim),
            slope_out: VecDeque::with_capacity(capacity * dim),
        })
    }

    /// Buffer holding `samples` (flattened, oldest first) on the grid ending
    /// at `t_now`. The window is sized to the samples provided.
    pub fn from_samples(dim: usize, grid_step: f64, t_now: f64, samples: &[f64]) -> Result<Self> {
        if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(Error::Contract(
                "samples must be a nonempty multiple of the dimension".into(),
            ));
        }
        let points = samples.len() / dim;
        let mut buf = Self::new(dim, grid_step, (points - 1) as f64 * grid_step)?;
        buf.capacity = points;
        let t_first = t_now - (points - 1) as f64 * grid_step;
        for (i, x) in samples.chunks_exact(dim).enumerate() {
            buf.push(t_first + i as f64 * grid_step, x, None);
        }
        buf.t_now = t_now;
        Ok(buf)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn max_delay(&self) -> f64 {
        self.max_delay
    }

    pub fn t_now(&self) -> f64 {
        self.t_now
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Earliest time still stored.
    pub fn t_oldest(&self) -> f64 {
        self.t_now - (self.len().saturating_sub(1)) as f64 * self.grid_step
    }

    /// Appends the state at `t` (one grid step after the previous push),
    /// evicting the oldest point when full. `slope_in` is the left derivative
    /// at `t`, when known.
    pub fn push(&mut self, t: f64, x: &[f64], slope_in: Option<&[f64]>) {
        debug_assert_eq!(x.len(), self.dim);
        if self.len() == self.capacity {
            for _ in 0..self.dim {
                self.values.pop_front();
                self.slope_in.pop_front();
                self.slope_out.pop_front();
            }
        }
        self.values.extend(x.iter().copied());
        match slope_in {
            Some(s) => self.slope_in.extend(s.iter().copied()),
            None => self.slope_in.extend(std::iter::repeat_n(f64::NAN, self.dim)),
        }
        self.slope_out.extend(std::iter::repeat_n(f64::NAN, self.dim));
        self.t_now = t;
    }

    /// Records the right derivative at the newest point.
    pub fn set_latest_slope_out(&mut self, slope: &[f64]) {
        let start = self.slope_out.len() - self.dim;
        for (k, s) in slope.iter().enumerate() {
            self.slope_out[start + k] = *s;
        }
    }

    /// State at the `back`-th point counting from the newest (0 = newest).
    pub fn back(&self, back: usize, out: &mut [f64]) {
        let p = self.len() - 1 - back;
        for k in 0..self.dim {
            out[k] = self.values[p * self.dim + k];
        }
    }

    /// Hermite value halfway between the `back`-th and `(back - 1)`-th newest
    /// points.
    pub fn hermite_midpoint(&self, back: usize, out: &mut [f64]) {
        let n = self.dim;
        let i = self.len() - 1 - back;
        let h = self.grid_step;
        for k in 0..n {
            let a = self.values[i * n + k];
            let b = self.values[(i + 1) * n + k];
            let da = self.slope_out[i * n + k];
            let db = self.slope_in[(i + 1) * n + k];
            out[k] = if da.is_nan() || db.is_nan() {
                0.5 * (a + b)
            } else {
                0.5 * (a + b) + 0.125 * h * (da - db)
            };
        }
    }

    pub fn latest(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.back(0, &mut out);
        out
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if self.is_empty() {
            return Err(Error::Contract("history is empty".into()));
        }
        let t_old = self.t_oldest();
        let tol = 1e-9 * self.grid_step;
        if t < t_old - tol || t > self.t_now + tol {
            return Err(Error::Contract(format!(
                "history query at t = {t} outside stored window [{t_old}, {}]",
                self.t_now
            )));
        }
        let s = ((t - t_old) / self.grid_step).max(0.0);
        let r = s.round();
        if (s - r).abs() < 1e-9 {
            return Ok(((r as usize).min(self.len() - 1), 0.0));
        }
        let i = (s.floor() as usize).min(self.len() - 2);
        Ok((i, s - i as f64))
    }

    /// Linear interpolation of the stored states at time `t`.
    pub fn query(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (i, frac) = self.locate(t)?;
        let n = self.dim;
        for k in 0..n {
            let a = self.values[i * n + k];
            out[k] = if frac == 0.0 {
                a
            } else {
                a + frac * (self.values[(i + 1) * n + k] - a)
            };
        }
        Ok(())
    }

    /// Cubic Hermite interpolation using stored one-sided slopes; falls back
    /// to linear interpolation on intervals with a missing slope.
    pub fn query_hermite(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (i, frac) = self.locate(t)?;
        if frac == 0.0 {
            return self.query(t, out);
        }
        let n = self.dim;
        let h = self.grid_step;
        let (s2, s3) = (frac * frac, frac * frac * frac);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + frac;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for k in 0..n {
            let a = self.values[i * n + k];
            let b = self.values[(i + 1) * n + k];
            let da = self.slope_out[i * n + k];
            let db = self.slope_in[(i + 1) * n + k];
            out[k] = if da.is_nan() || db.is_nan() {
                a + frac * (b - a)
            } else {
                h00 * a + h10 * h * da + h01 * b + h11 * h * db
            };
        }
        Ok(())
    }

    /// Grid samples on `[t_now - window, t_now]`, oldest first, flattened.
    pub fn window(&self, window: f64) -> Result<Vec<f64>> {
        let steps = (window / self.grid_step).round() as usize;
        if steps + 1 > self.len() {
            return Err(Error::Contract(format!(
                "history holds {} points, window of {window} needs {}",
                self.len(),
                steps + 1
            )));
        }
        let start = (self.len() - 1 - steps) * self.dim;
        Ok(self.values.range(start..).copied().collect())
    }
}
