//! Closed-form regret bounds and their analytical comparisons.
//!
//! Horizons are counted in batches. Under the Poisson request model the
//! horizon is `theta` time units split into batches of duration `tau`, so
//! `T = theta / tau` and a batch carries `lambda * tau` requests on average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traces::zipf_weights;

/// Regularization scale of PCOC.
pub const PCOC_SIGMA: f64 = 2.0;

/// Squared Euclidean diameter of the capped simplex, `min(2k, 2(N - k))`.
pub fn diameter_sq(capacity: usize, n_files: usize) -> f64 {
    2.0 * capacity.min(n_files.saturating_sub(capacity)) as f64
}

/// Regularization scale of OBC, `2 / Delta`. A full cache (`k = N`) leaves
/// a single feasible state, and the scale is reported as 0.
pub fn obc_sigma(capacity: usize, n_files: usize) -> f64 {
    let d = diameter_sq(capacity, n_files).sqrt();
    if d > 0.0 {
        2.0 / d
    } else {
        0.0
    }
}

/// `2 sqrt(2 min(k, N - k) sum_t ||g_t - g~_t||^2)`
pub fn obc_bound(capacity: usize, n_files: usize, err_sq: &[f64]) -> f64 {
    let total: f64 = err_sq.iter().sum();
    2.0 * (diameter_sq(capacity, n_files) * total).sqrt()
}

/// `2 ||w||_inf sqrt(2 min(k, N - k) T R h)`
pub fn obc_corollary(
    capacity: usize,
    n_files: usize,
    horizon: usize,
    batch_size: u64,
    max_count: u64,
    w_inf: f64,
) -> f64 {
    2.0 * w_inf * (diameter_sq(capacity, n_files) * horizon as f64 * batch_size as f64 * max_count as f64).sqrt()
}

/// `2 sum_i sqrt(sum_t (g_{t,i} - g~_{t,i})^2)`, one error series per file.
pub fn pcoc_bound<S: AsRef<[f64]>>(per_coord_err_sq: &[S]) -> f64 {
    2.0 * per_coord_err_sq.iter().map(|s| s.as_ref().iter().sum::<f64>().sqrt()).sum::<f64>()
}

/// [`pcoc_bound`] from per-file error totals `sum_t (g_{t,i} - g~_{t,i})^2`.
pub fn pcoc_bound_from_totals(totals: &[f64]) -> f64 {
    2.0 * totals.iter().map(|v| v.sqrt()).sum::<f64>()
}

/// `2 N h ||w|| sqrt(T)`
pub fn pcoc_corollary(n_files: usize, horizon: usize, max_count: u64, w_norm: f64) -> f64 {
    2.0 * n_files as f64 * max_count as f64 * w_norm * (horizon as f64).sqrt()
}

/// Smallest relative cache size `alpha` above which the expected PCOC bound
/// beats OBC's under Zipf(beta) popularity:
/// `(sum_i sqrt(p_i))^2 / (2 N sum_i p_i)`.
pub fn alpha_threshold(beta: f64, n_files: usize) -> f64 {
    // Normalization cancels; unnormalized weights keep beta = 0 exact.
    let w = zipf_weights(n_files, beta);
    let root_sum: f64 = w.iter().map(|v| v.sqrt()).sum();
    let sum: f64 = w.iter().sum();
    root_sum * root_sum / (2.0 * n_files as f64 * sum)
}

/// Poisson arrivals of total rate `lambda_total`, file `i` requested with
/// probability `popularity[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonModel {
    pub lambda_total: f64,
    pub popularity: Vec<f64>,
    /// Horizon in time units.
    pub theta: f64,
    /// Batch duration.
    pub tau: f64,
    /// Warm-up window for the first prediction.
    pub tau0: f64,
}

impl PoissonModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_total >= 0.0 && self.lambda_total.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be finite and nonnegative".into()));
        }
        if self.popularity.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter("popularity must be nonnegative".into()));
        }
        if !(self.tau > 0.0 && self.tau <= self.theta) {
            return Err(Error::InvalidParameter(format!(
                "batch duration tau = {} must satisfy 0 < tau <= theta = {}",
                self.tau, self.theta
            )));
        }
        Ok(())
    }

    /// `lambda_i = lambda p_i`
    pub fn rates(&self) -> Vec<f64> {
        self.popularity.iter().map(|p| self.lambda_total * p).collect()
    }

    /// Number of batches `theta / tau`.
    pub fn horizon(&self) -> f64 {
        self.theta / self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedBounds {
    pub obc: f64,
    pub pcoc: f64,
}

/// Expected bounds of both policies when predictions equal the per-batch
/// means: OBC `2 sqrt(2 alpha lambda N T)`, PCOC `2 sum_i sqrt(T lambda p_i)`,
/// with per-batch rate `lambda tau` and `T = theta / tau`.
pub fn expected_bounds_poisson(model: &PoissonModel, alpha: f64) -> Result<ExpectedBounds> {
    model.validate()?;
    let t = model.horizon();
    let rate = model.lambda_total * model.tau;
    let n = model.popularity.len() as f64;
    let obc = 2.0 * (2.0 * alpha * rate * n * t).sqrt();
    let pcoc = 2.0 * model.popularity.iter().map(|p| (t * rate * p).sqrt()).sum::<f64>();
    Ok(ExpectedBounds { obc, pcoc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionModel {
    /// Predictions equal the expected next batch.
    Mean,
    /// Predictions repeat the previous batch; the first one comes from the
    /// warm-up window.
    PreviousBatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchAnalysis {
    /// Expected `sum_t sum_i (g_{t,i} - g~_{t,i})^2` over the horizon.
    pub expected_sq_error: f64,
    /// OBC bound `C sqrt(expected_sq_error)`, `C = 2 sqrt(2 min(k, N - k))`.
    pub regret_bound: f64,
    /// Batch duration minimizing the bound; `None` when it does not depend
    /// on the batch duration.
    pub optimal_tau: Option<f64>,
}

/// Effect of the batch duration on the expected OBC bound.
pub fn batch_error_analysis(model: &PoissonModel, capacity: usize, mode: PredictionModel) -> Result<BatchAnalysis> {
    model.validate()?;
    let n = model.popularity.len();
    let c = 2.0 * diameter_sq(capacity, n).sqrt();
    let rates = model.rates();
    let (err, optimal_tau) = match mode {
        PredictionModel::Mean => (model.theta * rates.iter().sum::<f64>(), None),
        PredictionModel::PreviousBatch => {
            if model.tau0.is_nan() || model.tau0 <= 0.0 {
                return Err(Error::InvalidParameter("warm-up tau0 must be positive".into()));
            }
            (
                previous_batch_error(&rates, model.theta, model.tau, model.tau0),
                Some(optimal_batch_tau(model.tau0, model.theta)),
            )
        }
    };
    Ok(BatchAnalysis { expected_sq_error: err, regret_bound: c * err.sqrt(), optimal_tau })
}

/// `sum_i ((theta - tau) / tau) 2 lambda_i tau + lambda_i tau + m_i^2 tau^2`
/// with `m_i^2 = lambda_i / tau0`.
pub fn previous_batch_error(rates: &[f64], theta: f64, tau: f64, tau0: f64) -> f64 {
    rates
        .iter()
        .map(|l| {
            let m_sq = l / tau0;
            (theta - tau) / tau * 2.0 * l * tau + l * tau + m_sq * tau * tau
        })
        .sum()
}

/// `min(tau0 / 2, theta)`
pub fn optimal_batch_tau(tau0: f64, theta: f64) -> f64 {
    (tau0 / 2.0).min(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obc_bound_examples() {
        assert_eq!(obc_bound(10, 100, &[0.0; 5]), 0.0);
        assert_eq!(obc_bound(100, 100, &[3.0, 7.0]), 0.0);
        assert!((obc_bound(1, 3, &[4.0, 5.0]) - 6.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn obc_corollary_examples() {
        assert_eq!(obc_corollary(1, 2, 4, 1, 0, 1.0), 0.0);
        let a = obc_corollary(3, 10, 5, 7, 2, 1.5);
        let b = obc_corollary(3, 10, 20, 7, 2, 1.5);
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!((obc_corollary(1, 2, 4, 1, 1, 1.0) - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pcoc_bound_examples() {
        assert_eq!(pcoc_bound(&[vec![0.0; 3], vec![0.0; 3]]), 0.0);
        assert_eq!(pcoc_bound(&[vec![9.0, 16.0]]), 10.0);
        assert_eq!(pcoc_bound_from_totals(&[25.0, 0.0]), 10.0);
    }

    #[test]
    fn constant_error_favors_obc() {
        let (n, t, eps) = (20usize, 50usize, 0.7f64);
        for k in 1..n {
            let per_coord: Vec<Vec<f64>> = (0..n).map(|_| vec![eps * eps; t]).collect();
            let pcoc = pcoc_bound(&per_coord);
            let obc = obc_bound(k, n, &vec![n as f64 * eps * eps; t]);
            assert!((pcoc - 2.0 * n as f64 * (t as f64 * eps * eps).sqrt()).abs() < 1e-9);
            assert!(obc <= pcoc + 1e-9, "k = {k}");
        }
    }

    #[test]
    fn pcoc_corollary_examples() {
        assert_eq!(pcoc_corollary(5, 9, 0, 1.0), 0.0);
        assert_eq!(pcoc_corollary(4, 9, 2, 1.0), 2.0 * pcoc_corollary(2, 9, 2, 1.0));
        assert_eq!(pcoc_corollary(2, 9, 1, 1.0), 12.0);
    }

    #[test]
    fn threshold_examples() {
        for n in [1, 2, 7, 1000, 4096] {
            assert_eq!(alpha_threshold(0.0, n), 0.5);
        }
        for beta in [0.3, 1.0, 2.5] {
            assert_eq!(alpha_threshold(beta, 1), 0.5);
        }
        let betas = [0.0, 0.4, 0.8, 1.2, 1.6, 2.0];
        let values: Vec<f64> = betas.iter().map(|&b| alpha_threshold(b, 1000)).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    fn model(lambda: f64, p: Vec<f64>, theta: f64, tau: f64, tau0: f64) -> PoissonModel {
        PoissonModel { lambda_total: lambda, popularity: p, theta, tau, tau0 }
    }

    #[test]
    fn expected_bounds_examples() {
        let n = 8;
        let b = expected_bounds_poisson(&model(3.0, vec![1.0 / n as f64; n], 5.0, 1.0, 1.0), 0.5).unwrap();
        assert!((b.obc - b.pcoc).abs() < 1e-12);

        let b = expected_bounds_poisson(&model(0.0, vec![0.5, 0.5], 5.0, 1.0, 1.0), 0.5).unwrap();
        assert_eq!((b.obc, b.pcoc), (0.0, 0.0));

        let b = expected_bounds_poisson(&model(4.0, vec![0.75, 0.25], 1.0, 1.0, 1.0), 0.5).unwrap();
        assert!((b.obc - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((b.pcoc - 2.0 * (3f64.sqrt() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn mean_predictor_ignores_batch_duration() {
        let p = crate::traces::zipf_pmf(50, 0.9);
        let at =
            |tau| batch_error_analysis(&model(7.0, p.clone(), 100.0, tau, 10.0), 5, PredictionModel::Mean).unwrap();
        let base = at(1.0);
        assert_eq!(base, at(10.0));
        assert_eq!(base, at(100.0));
        assert_eq!(base.optimal_tau, None);
        assert!(batch_error_analysis(&model(7.0, p, 10.0, 20.0, 10.0), 5, PredictionModel::Mean).is_err());
    }

    #[test]
    fn optimal_tau_rule() {
        assert_eq!(optimal_batch_tau(200.0, 100.0), 100.0);
        assert_eq!(optimal_batch_tau(50.0, 100.0), 25.0);
    }

    #[test]
    fn previous_batch_error_minimized_at_half_warmup() {
        let rates = [0.5, 1.5, 3.0];
        let (theta, tau0) = (100.0, 30.0);
        let h = 1e-4;
        let slope = |tau: f64| {
            (previous_batch_error(&rates, theta, tau + h, tau0) - previous_batch_error(&rates, theta, tau - h, tau0))
                / (2.0 * h)
        };
        let star = tau0 / 2.0;
        assert!(slope(star - 1.0) < 0.0);
        assert!(slope(star + 1.0) > 0.0);
        assert!(slope(star).abs() < 1e-6);
    }
}
