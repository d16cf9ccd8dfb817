//! Linear readout: NARMA10 targets, ridge regression and NRMSE.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression design matrix, row-major. The last column is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StateMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows < 1 || cols < 2 {
            return Err(Error::Contract(format!(
                "state matrix must be at least 1 x 2, got {rows} x {cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "{} entries for a {rows} x {cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("state matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Appends a bias column of ones to feature rows.
    pub fn with_bias(features: &[Vec<f64>]) -> Result<Self> {
        let width = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != width) {
            return Err(Error::Contract("ragged feature rows".into()));
        }
        let data = features
            .iter()
            .flat_map(|r| r.iter().copied().chain(std::iter::once(1.0)))
            .collect();
        Self::new(features.len(), width + 1, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows `range.start..range.end` as a new matrix.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.rows {
            return Err(Error::Contract(format!(
                "row range {range:?} invalid for {} rows",
                self.rows
            )));
        }
        let data = self.data[range.start * self.cols..range.end * self.cols].to_vec();
        Self::new(range.end - range.start, self.cols, data)
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub lambda: f64,
}

/// Generates `warmup + n` NARMA10 outputs and returns the last `n`.
///
/// `y[k+1] = 0.3 y[k] + 0.05 y[k] sum_{i=0}^{9} y[k-i] + 1.5 u[k-9] u[k] + 0.1`
/// for `k >= 9`, with `y[j] = 0` for `j < 10`.
pub fn narma10(u: &[f64], n: usize, warmup: usize) -> Result<Vec<f64>> {
    let total = n + warmup;
    if u.len() < total {
        return Err(Error::Contract(format!(
            "NARMA10 needs {total} inputs, got {}",
            u.len()
        )));
    }
    if let Some(bad) = u[..total].iter().find(|v| !(0.0..=0.5).contains(*v)) {
        log::warn!("NARMA10 input {bad} outside [0, 0.5]");
    }
    let mut y = vec![0.0; total];
    for k in 9..total.saturating_sub(1) {
        let window: f64 = y[k - 9..=k].iter().sum();
        let next = 0.3 * y[k] + 0.05 * y[k] * window + 1.5 * u[k - 9] * u[k] + 0.1;
        if !(next.abs() <= 1e3) {
            return Err(Error::Instability(format!(
                "NARMA10 recursion diverged at index {}",
                k + 1
            )));
        }
        y[k + 1] = next;
    }
    Ok(y.split_off(warmup))
}

/// Solves `(X^T X + lambda D) w = X^T y` with `D = diag(1, ..., 1, 0)`: the
/// trailing bias column is not penalised.
pub fn ridge_fit(x: &StateMatrix, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if x.rows() != y.len() {
        return Err(Error::Contract(format!(
            "{} rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Contract(format!("lambda = {lambda} must be nonnegative")));
    }
    let xm = x.to_dmatrix();
    let yv = DVector::from_column_slice(y);
    let mut gram = xm.transpose() * &xm;
    for i in 0..x.cols() - 1 {
        gram[(i, i)] += lambda;
    }
    let rhs = xm.transpose() * yv;
    let scale = (0..x.cols()).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let singular = || {
        Error::RankDeficient(format!(
            "normal equations are singular at lambda = {lambda}; use lambda > 0"
        ))
    };
    let chol = nalgebra::Cholesky::new(gram).ok_or_else(singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if !(min_pivot > 1e-13 * scale) {
        return Err(singular());
    }
    let w = chol.solve(&rhs);
    Ok(RidgeModel {
        weights: w.iter().copied().collect(),
        lambda,
    })
}

pub fn predict(x: &StateMatrix, model: &RidgeModel) -> Result<Vec<f64>> {
    if x.cols() != model.weights.len() {
        return Err(Error::Contract(format!(
            "matrix has {} columns, model {} weights",
            x.cols(),
            model.weights.len()
        )));
    }
    Ok((0..x.rows())
        .map(|r| x.row(r).iter().zip(&model.weights).map(|(a, b)| a * b).sum())
        .collect())
}

/// `sqrt(mean((y - y_hat)^2) / var(y))` with the population variance.
pub fn nrmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Contract(format!(
            "length mismatch: {} targets, {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Contract("NRMSE needs at least two points".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Domain("targets have zero variance".into()));
    }
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    Ok((mse / var).sqrt())
}

/// Decades `1e-8 ..= 1e-2`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-8..=-2).map(|e| 10f64.powi(e)).collect()
}

/// Picks the grid value with the lowest NRMSE on the trailing
/// `validation_fraction` of the rows after fitting on the leading rows.
/// Ties keep the smaller lambda.
pub fn select_lambda(
    x: &StateMatrix,
    y: &[f64],
    grid: &[f64],
    validation_fraction: f64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Contract("empty lambda grid".into()));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::Contract(format!(
            "validation fraction {validation_fraction} must lie in (0, 1)"
        )));
    }
    let n_val = ((x.rows() as f64) * validation_fraction).round() as usize;
    let n_fit = x.rows().saturating_sub(n_val);
    if n_val < 2 || n_fit < 1 {
        return Err(Error::Contract("too few rows for a validation split".into()));
    }
    let fit_x = x.slice_rows(0..n_fit)?;
    let val_x = x.slice_rows(n_fit..x.rows())?;
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let score = match ridge_fit(&fit_x, &y[..n_fit], lambda) {
            Ok(model) => nrmse(&y[n_fit..], &predict(&val_x, &model)?)?,
            Err(Error::RankDeficient(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((lambda, score));
        }
    }
    best.map(|(l, _)| l)
        .ok_or_else(|| Error::RankDeficient("every lambda on the grid is singular".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn narma_zero_input_prefix() {
        let y = narma10(&[0.0; 20], 20, 0).unwrap();
        assert!(y[..10].iter().all(|v| *v == 0.0));
        assert!((y[10] - 0.1).abs() < 1e-15);
        assert!((y[11] - 0.1305).abs() < 1e-15);
    }

    #[test]
    fn narma_zero_input_fixed_point() {
        // independent fixed-point iteration of y = 0.3 y + 0.5 y^2 + 0.1
        let mut f = 0.0;
        for _ in 0..10_000 {
            f = 0.3 * f + 0.5 * f * f + 0.1;
        }
        assert!((f - (0.7 - 0.29f64.sqrt())).abs() < 1e-12);
        let y = narma10(&[0.0; 3000], 3000, 0).unwrap();
        assert!((y[2999] - f).abs() < 1e-10);
    }

    #[test]
    fn narma_full_warmup_is_empty() {
        assert!(narma10(&[0.2; 30], 0, 30).unwrap().is_empty());
        assert!(narma10(&[0.2; 5], 10, 0).is_err());
    }

    #[test]
    fn narma_divergence() {
        assert!(matches!(narma10(&[5.0; 200], 200, 0), Err(Error::Instability(_))));
    }

    #[test]
    fn ridge_interpolates_square_systems() {
        let x = StateMatrix::new(3, 3, vec![1.0, 2.0, 1.0, -1.0, 0.5, 1.0, 3.0, -2.0, 1.0]).unwrap();
        let y = [1.0, -2.0, 0.5];
        let m = ridge_fit(&x, &y, 0.0).unwrap();
        let yh = predict(&x, &m).unwrap();
        for (a, b) in y.iter().zip(&yh) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ridge_two_by_two_hand_solve() {
        let x = StateMatrix::new(2, 2, vec![1.0, 1.0, 2.0, 1.0]).unwrap();
        let m = ridge_fit(&x, &[1.0, 2.0], 1.0).unwrap();
        // [[6,3],[3,2]] w = [5,3]
        assert!((m.weights[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_heavy_shrinkage() {
        let feats: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 - 9.5;
                vec![t, (t * 0.7).sin()]
            })
            .collect();
        let x = StateMatrix::with_bias(&feats).unwrap();
        let y: Vec<f64> = (0..20).map(|i| 2.0 + 0.5 * i as f64).collect();
        let m = ridge_fit(&x, &y, 1e12).unwrap();
        let ymax = y.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        assert!(m.weights[0].abs() < 1e-6 * ymax);
        assert!(m.weights[1].abs() < 1e-6 * ymax);
    }

    #[test]
    fn ridge_rank_deficiency() {
        let x = StateMatrix::new(3, 2, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0), Err(Error::RankDeficient(_))));
        assert!(ridge_fit(&x, &[1.0, 2.0, 3.0], 1e-3).is_ok());
        assert!(ridge_fit(&x, &[1.0, 2.0], 1e-3).is_err());
    }

    #[test]
    fn predict_examples() {
        let x = StateMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let zero = RidgeModel {
            weights: vec![0.0, 0.0],
            lambda: 0.0,
        };
        assert_eq!(predict(&x, &zero).unwrap(), vec![0.0, 0.0]);
        let m = RidgeModel {
            weights: vec![3.0, -4.0],
            lambda: 0.0,
        };
        assert_eq!(predict(&x, &m).unwrap(), vec![3.0, -4.0]);
        let short = RidgeModel {
            weights: vec![1.0],
            lambda: 0.0,
        };
        assert!(predict(&x, &short).is_err());
    }

    #[test]
    fn nrmse_examples() {
        let y = [0.3, 0.9, -0.2, 0.4];
        assert_eq!(nrmse(&y, &y).unwrap(), 0.0);
        let mean = y.iter().sum::<f64>() / 4.0;
        assert!((nrmse(&y, &[mean; 4]).unwrap() - 1.0).abs() < 1e-14);
        assert!((nrmse(&[0.0, 1.0], &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(nrmse(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::Domain(_))));
        assert!(nrmse(&[1.0], &[1.0]).is_err());
        assert!(nrmse(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn lambda_selection_prefers_a_grid_value() {
        let feats: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64 * 0.3).sin(), (i as f64 * 0.11).cos()]).collect();
        let x = StateMatrix::with_bias(&feats).unwrap();
        let y: Vec<f64> = feats.iter().map(|f| 2.0 * f[0] - f[1] + 0.3).collect();
        let grid = default_lambda_grid();
        let l = select_lambda(&x, &y, &grid, 0.2).unwrap();
        assert!(grid.contains(&l));
    }

    fn dataset(seed: u64) -> (StateMatrix, Vec<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let feats: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        (StateMatrix::with_bias(&feats).unwrap(), y)
    }

    proptest! {
        #[test]
        fn training_mse_is_monotone_in_lambda(seed in 0u64..500, l1 in 1e-6f64..1.0, factor in 1.0f64..100.0) {
            let (x, y) = dataset(seed);
            let mse = |l: f64| {
                let m = ridge_fit(&x, &y, l).unwrap();
                let p = predict(&x, &m).unwrap();
                y.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            };
            prop_assert!(mse(l1) <= mse(l1 * factor) * (1.0 + 1e-10) + 1e-14);
        }

        #[test]
        fn nrmse_is_scale_invariant(seed in 0u64..500, a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
            let (_, y) = dataset(seed);
            let (_, yh) = dataset(seed + 1000);
            let ys: Vec<f64> = y.iter().map(|v| a * v).collect();
            let yhs: Vec<f64> = yh.iter().map(|v| a * v).collect();
            let base = nrmse(&y, &yh).unwrap();
            prop_assert!((nrmse(&ys, &yhs).unwrap() - base).abs() < 1e-12 * base.max(1.0));
        }

        #[test]
        fn narma_is_deterministic(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..0.5)).collect();
            let a = narma10(&u, 250, 50).unwrap();
            let b = narma10(&u, 250, 50).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}
