use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States on the uniform grid `t0 + i * dt`, stored flat (`dim` per point).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    dim: usize,
    states: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L2,
    Sup,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, dim: usize, states: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Contract(format!("time step {dt} must be positive")));
        }
        if dim == 0 || states.is_empty() || !states.len().is_multiple_of(dim) {
            return Err(Error::Contract(
                "trajectory needs at least one state of the declared dimension".into(),
            ));
        }
        Ok(Self { t0, dt, dim, states })
    }

    /// Scalar trajectory sampled from `f` at `points` grid points.
    pub fn from_fn(t0: f64, dt: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let states = (0..points).map(|i| f(t0 + i as f64 * dt)).collect();
        Self::new(t0, dt, 1, states)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Component `c` of every state.
    pub fn component(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().skip(c).step_by(self.dim).copied()
    }

    /// Euclidean norm of each state.
    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.states
            .chunks_exact(self.dim)
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Grid index nearest to `t`, if `t` lies within the trajectory.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let s = (t - self.t0) / self.dt;
        let i = s.round();
        if i < 0.0 || i as usize >= self.len() || (s - i).abs() > 0.5 + 1e-9 {
            return Err(Error::Contract(format!(
                "time {t} outside trajectory [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        Ok(i as usize)
    }

    /// Grid index of `t`, which must lie on the grid (relative tolerance 1e-6
    /// of a step).
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let s = (t - self.t0) / self.dt;
        let i = s.round();
        if (s - i).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "time {t} is not on the integration grid (dt = {})",
                self.dt
            )));
        }
        self.index_of(t)
    }

    /// Pointwise difference `self - other`; grids must match.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.dim != other.dim
            || self.len() != other.len()
            || self.dt != other.dt
            || self.t0 != other.t0
        {
            return Err(Error::Contract("trajectories are on different grids".into()));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a - b)
            .collect();
        Trajectory::new(self.t0, self.dt, self.dim, states)
    }
}

/// `L2`: `sqrt(int_{t_a}^{t_b} |x|^2 dt)` by the trapezoidal rule on the grid;
/// `Sup`: the largest grid-point norm. Endpoints snap to the nearest grid
/// point.
pub fn trajectory_segment_norm(traj: &Trajectory, t_a: f64, t_b: f64, norm: Norm) -> Result<f64> {
    if !(t_a < t_b) {
        return Err(Error::Contract(format!("empty interval [{t_a}, {t_b}]")));
    }
    let ia = traj.index_of(t_a)?;
    let ib = traj.index_of(t_b)?;
    if ib <= ia {
        return Err(Error::Contract(format!(
            "interval [{t_a}, {t_b}] is shorter than one grid step"
        )));
    }
    let norms: Vec<f64> = traj.norms().skip(ia).take(ib - ia + 1).collect();
    Ok(match norm {
        Norm::Sup => norms.iter().fold(0.0, |m, v| m.max(*v)),
        Norm::L2 => {
            let sq = |v: f64| v * v;
            let inner: f64 = norms[1..norms.len() - 1].iter().map(|v| sq(*v)).sum();
            let ends = 0.5 * (sq(norms[0]) + sq(norms[norms.len() - 1]));
            (traj.dt() * (inner + ends)).sqrt()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_l2_norm() {
        let tr = Trajectory::from_fn(0.0, 1e-3, 1001, |_| -2.5).unwrap();
        let n = trajectory_segment_norm(&tr, 0.0, 1.0, Norm::L2).unwrap();
        assert!((n - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ramp_l2_norm() {
        let tr = Trajectory::from_fn(0.0, 1e-3, 1001, |t| t).unwrap();
        let n = trajectory_segment_norm(&tr, 0.0, 1.0, Norm::L2).unwrap();
        assert!((n - 1.0 / 3f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn sine_sup_norm() {
        let dt = 1e-3;
        let tr = Trajectory::from_fn(0.0, dt, 3200, f64::sin).unwrap();
        let n = trajectory_segment_norm(&tr, 0.0, PI, Norm::Sup).unwrap();
        assert!((n - 1.0).abs() <= dt);
    }

    #[test]
    fn empty_interval_is_rejected() {
        let tr = Trajectory::from_fn(0.0, 0.1, 11, |t| t).unwrap();
        assert!(trajectory_segment_norm(&tr, 0.5, 0.5, Norm::L2).is_err());
        assert!(trajectory_segment_norm(&tr, 0.6, 0.5, Norm::Sup).is_err());
        assert!(trajectory_segment_norm(&tr, 0.0, 3.0, Norm::Sup).is_err());
    }

    #[test]
    fn vector_norms_and_difference() {
        let a = Trajectory::new(0.0, 1.0, 2, vec![3.0, 4.0, 0.0, 1.0]).unwrap();
        let b = Trajectory::new(0.0, 1.0, 2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.norms().collect::<Vec<_>>(), vec![5.0, 1.0]);
        let d = a.difference(&b).unwrap();
        assert_eq!(d.state(0), &[3.0, 4.0]);
        assert_eq!(d.state(1), &[0.0, 0.0]);
        assert_eq!(a.component(1).collect::<Vec<_>>(), vec![4.0, 1.0]);
    }
}
