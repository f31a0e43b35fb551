//! Optimistic follow-the-regularized-leader policies.
//!
//! Both policies pick
//!
//! ```text
//! x_{t+1} = argmin_{x in X}  r_{1:t}(x) + (g_{1:t} + g~_{t+1})^T x
//! ```
//!
//! with proximal quadratic regularizers centered at past states. Expanding
//! the regularizer gives a [`DiagonalQp`] with curvature `A_i = sigma_{1:t,i}`
//! and pull `b_i = sum_s sigma_{s,i} x_{s,i} - (g_{1:t,i} + g~_{t+1,i})`.
//!
//! OBC shares one curvature across files, driven by the total squared
//! prediction error; PCOC keeps one curvature per file.

use crate::bounds;
use crate::error::{check_len, Result};
use crate::model::{batch_cost, gradient_from_batch, CacheConfig, CacheState, Catalog, GradientVector, RequestBatch};
use crate::predictors::Prediction;
use crate::simplex::{solve_diag_qp, DiagonalQp};

use super::CachePolicy;

/// Accumulators common to both FTRL variants.
#[derive(Debug, Clone)]
struct FtrlCore {
    catalog: Catalog,
    capacity: usize,
    x: CacheState,
    agg_grad: Vec<f64>,
    pull: Vec<f64>,
    last_pred: GradientVector,
    pending: Option<GradientVector>,
    last_qp: Option<DiagonalQp>,
}

impl FtrlCore {
    fn new(catalog: Catalog, config: &CacheConfig, x1: CacheState, first_pred: Option<&Prediction>) -> Result<Self> {
        let n = catalog.n_files();
        check_len(n, config.n_files())?;
        check_len(n, x1.len())?;
        let last_pred = match first_pred {
            Some(p) => {
                check_len(n, p.gradient().len())?;
                p.gradient().clone()
            }
            None => GradientVector::zeros(n),
        };
        Ok(Self {
            catalog,
            capacity: config.capacity(),
            x: x1,
            agg_grad: vec![0.0; n],
            pull: vec![0.0; n],
            last_pred,
            pending: None,
            last_qp: None,
        })
    }

    fn serve(&mut self, batch: &RequestBatch) -> Result<f64> {
        let cost = batch_cost(&self.catalog, batch, &self.x)?;
        self.pending = Some(gradient_from_batch(&self.catalog, batch)?);
        Ok(cost)
    }

    /// Folds `g_t` into the aggregate and the curvature increment
    /// `sigma_t` (per file) into the pull, then solves for `x_{t+1}`.
    fn advance(
        &mut self,
        grad: &GradientVector,
        sigma_inc: impl Fn(usize) -> f64,
        quad: Vec<f64>,
        pred: &GradientVector,
    ) -> Result<()> {
        check_len(self.agg_grad.len(), pred.len())?;
        let x = self.x.as_slice();
        for (i, ((p, a), g)) in self.pull.iter_mut().zip(&mut self.agg_grad).zip(grad.as_slice()).enumerate() {
            *p += sigma_inc(i) * x[i];
            *a += g;
        }
        let lin: Vec<f64> =
            self.pull.iter().zip(&self.agg_grad).zip(pred.as_slice()).map(|((p, g), gp)| p - (g + gp)).collect();
        let qp = DiagonalQp::new(quad, lin, self.capacity)?;
        self.x = solve_diag_qp(&qp)?;
        self.last_pred = pred.clone();
        self.last_qp = Some(qp);
        Ok(())
    }
}

/// Optimistic Bipartite Caching: regularizer `sigma_t / 2 ||x - x_t||^2`
/// with `sigma_t = sigma (sqrt(h_{1:t}) - sqrt(h_{1:t-1}))` and
/// `h_t = ||g_t - g~_t||^2`.
#[derive(Debug, Clone)]
pub struct ObcPolicy {
    core: FtrlCore,
    sigma_scale: f64,
    err_sum: f64,
    sigma_sum: f64,
}

impl ObcPolicy {
    /// Uses `sigma = 2 / Delta` with `Delta^2 = min(2k, 2(N - k))`, the choice
    /// that minimizes the regret bound.
    pub fn new(
        catalog: Catalog,
        config: &CacheConfig,
        x1: CacheState,
        first_pred: Option<&Prediction>,
    ) -> Result<Self> {
        let sigma = bounds::obc_sigma(config.capacity(), config.n_files());
        Self::with_sigma(catalog, config, x1, first_pred, sigma)
    }

    pub fn with_sigma(
        catalog: Catalog,
        config: &CacheConfig,
        x1: CacheState,
        first_pred: Option<&Prediction>,
        sigma: f64,
    ) -> Result<Self> {
        Ok(Self {
            core: FtrlCore::new(catalog, config, x1, first_pred)?,
            sigma_scale: sigma,
            err_sum: 0.0,
            sigma_sum: 0.0,
        })
    }

    /// Serves `batch` and moves to the state for the batch predicted by `pred`.
    pub fn step(&mut self, batch: &RequestBatch, pred: &GradientVector) -> Result<&CacheState> {
        let grad = gradient_from_batch(&self.core.catalog, batch)?;
        self.advance(&grad, pred)?;
        Ok(&self.core.x)
    }

    fn advance(&mut self, grad: &GradientVector, pred: &GradientVector) -> Result<()> {
        check_len(grad.len(), self.core.last_pred.len())?;
        let h = grad.dist_sq(&self.core.last_pred);
        let sigma_t = sigma_increment(self.sigma_scale, self.err_sum, self.err_sum + h);
        self.err_sum += h;
        self.sigma_sum += sigma_t;
        let quad = vec![self.sigma_sum; grad.len()];
        self.core.advance(grad, |_| sigma_t, quad, pred)
    }

    pub fn sigma_scale(&self) -> f64 {
        self.sigma_scale
    }

    /// `h_{1:t}`
    pub fn err_sum(&self) -> f64 {
        self.err_sum
    }

    /// `sigma_{1:t}`
    pub fn sigma_sum(&self) -> f64 {
        self.sigma_sum
    }

    pub fn pull(&self) -> &[f64] {
        &self.core.pull
    }

    pub fn agg_grad(&self) -> &[f64] {
        &self.core.agg_grad
    }

    pub fn last_prediction(&self) -> &GradientVector {
        &self.core.last_pred
    }

    /// Problem solved by the most recent update.
    pub fn last_problem(&self) -> Option<&DiagonalQp> {
        self.core.last_qp.as_ref()
    }
}

/// `sigma (sqrt(new) - sqrt(old))`
pub(crate) fn sigma_increment(sigma: f64, old_sum: f64, new_sum: f64) -> f64 {
    sigma * (new_sum.sqrt() - old_sum.sqrt())
}

impl CachePolicy for ObcPolicy {
    fn name(&self) -> &'static str {
        "obc"
    }

    fn state(&self) -> &CacheState {
        &self.core.x
    }

    fn serve(&mut self, _requests: &[usize], batch: &RequestBatch) -> Result<f64> {
        self.core.serve(batch)
    }

    fn update(&mut self, next: &Prediction) -> Result<()> {
        let grad = self.core.pending.take().expect("update called before serve");
        self.advance(&grad, next.gradient())
    }
}

/// Per-Coordinate Optimistic Caching: file `i` is regularized with
/// `sigma_{t,i} = sigma (Delta_{t,i} - Delta_{t-1,i})`, where
/// `Delta_{t,i} = sqrt(sum_{a<=t} (g_{a,i} - g~_{a,i})^2)`.
#[derive(Debug, Clone)]
pub struct PcocPolicy {
    core: FtrlCore,
    sigma_scale: f64,
    err_sq: Vec<f64>,
    sigma_sums: Vec<f64>,
}

impl PcocPolicy {
    /// Uses `sigma = 2`, the choice that minimizes the regret bound.
    pub fn new(
        catalog: Catalog,
        config: &CacheConfig,
        x1: CacheState,
        first_pred: Option<&Prediction>,
    ) -> Result<Self> {
        Self::with_sigma(catalog, config, x1, first_pred, bounds::PCOC_SIGMA)
    }

    pub fn with_sigma(
        catalog: Catalog,
        config: &CacheConfig,
        x1: CacheState,
        first_pred: Option<&Prediction>,
        sigma: f64,
    ) -> Result<Self> {
        let n = catalog.n_files();
        Ok(Self {
            core: FtrlCore::new(catalog, config, x1, first_pred)?,
            sigma_scale: sigma,
            err_sq: vec![0.0; n],
            sigma_sums: vec![0.0; n],
        })
    }

    pub fn step(&mut self, batch: &RequestBatch, pred: &GradientVector) -> Result<&CacheState> {
        let grad = gradient_from_batch(&self.core.catalog, batch)?;
        self.advance(&grad, pred)?;
        Ok(&self.core.x)
    }

    fn advance(&mut self, grad: &GradientVector, pred: &GradientVector) -> Result<()> {
        check_len(grad.len(), self.core.last_pred.len())?;
        let incs: Vec<f64> = (0..grad.len())
            .map(|i| {
                let e = grad.0[i] - self.core.last_pred.0[i];
                let old = self.err_sq[i];
                self.err_sq[i] += e * e;
                sigma_increment(self.sigma_scale, old, self.err_sq[i])
            })
            .collect();
        for (s, inc) in self.sigma_sums.iter_mut().zip(&incs) {
            *s += inc;
        }
        let quad = self.sigma_sums.clone();
        self.core.advance(grad, |i| incs[i], quad, pred)
    }

    pub fn sigma_scale(&self) -> f64 {
        self.sigma_scale
    }

    /// `Delta_{t,i}` for every file.
    pub fn deltas(&self) -> Vec<f64> {
        self.err_sq.iter().map(|v| v.sqrt()).collect()
    }

    /// `sigma_{1:t,i}` for every file.
    pub fn sigma_sums(&self) -> &[f64] {
        &self.sigma_sums
    }

    pub fn pull(&self) -> &[f64] {
        &self.core.pull
    }

    pub fn agg_grad(&self) -> &[f64] {
        &self.core.agg_grad
    }

    pub fn last_problem(&self) -> Option<&DiagonalQp> {
        self.core.last_qp.as_ref()
    }
}

impl CachePolicy for PcocPolicy {
    fn name(&self) -> &'static str {
        "pcoc"
    }

    fn state(&self) -> &CacheState {
        &self.core.x
    }

    fn serve(&mut self, _requests: &[usize], batch: &RequestBatch) -> Result<f64> {
        self.core.serve(batch)
    }

    fn update(&mut self, next: &Prediction) -> Result<()> {
        let grad = self.core.pending.take().expect("update called before serve");
        self.advance(&grad, next.gradient())
    }
}
