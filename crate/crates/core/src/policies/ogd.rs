use crate::error::{check_len, Error, Result};
use crate::model::{batch_cost, gradient_from_batch, CacheConfig, CacheState, Catalog, GradientVector, RequestBatch};
use crate::predictors::Prediction;
use crate::simplex::project_capped_simplex;

use super::CachePolicy;

/// Step size `sqrt(2k / T) / (||w||_inf * R * h)`: diameter of the capped
/// simplex over the horizon, scaled by a bound on the batch gradient.
///
/// `h` is the largest per-file count observed in a batch.
pub fn ogd_step_size(capacity: usize, horizon: usize, max_weight: f64, batch_size: u64, max_count: u64) -> Result<f64> {
    let denom = max_weight * batch_size as f64 * max_count as f64;
    if horizon == 0 || denom <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "OGD step size needs T >= 1 and a nonzero gradient bound (T = {horizon}, bound = {denom})"
        )));
    }
    Ok((2.0 * capacity as f64 / horizon as f64).sqrt() / denom)
}

/// Projected online gradient descent; ignores predictions.
#[derive(Debug, Clone)]
pub struct OgdPolicy {
    catalog: Catalog,
    capacity: usize,
    eta: f64,
    x: CacheState,
    pending: Option<GradientVector>,
}

impl OgdPolicy {
    pub fn new(catalog: Catalog, config: &CacheConfig, x1: CacheState, eta: f64) -> Result<Self> {
        check_len(catalog.n_files(), x1.len())?;
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("OGD step size {eta} must be finite and nonnegative")));
        }
        Ok(Self { catalog, capacity: config.capacity(), eta, x: x1, pending: None })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `x_{t+1} = Proj_X(x_t - eta g_t)`
    pub fn step_with_gradient(&mut self, grad: &GradientVector) -> Result<&CacheState> {
        check_len(self.x.len(), grad.len())?;
        let y: Vec<f64> = self.x.as_slice().iter().zip(grad.as_slice()).map(|(x, g)| x - self.eta * g).collect();
        self.x = project_capped_simplex(&y, self.capacity)?;
        Ok(&self.x)
    }
}

impl CachePolicy for OgdPolicy {
    fn name(&self) -> &'static str {
        "ogd"
    }

    fn state(&self) -> &CacheState {
        &self.x
    }

    fn serve(&mut self, _requests: &[usize], batch: &RequestBatch) -> Result<f64> {
        let cost = batch_cost(&self.catalog, batch, &self.x)?;
        self.pending = Some(gradient_from_batch(&self.catalog, batch)?);
        Ok(cost)
    }

    fn update(&mut self, _next: &Prediction) -> Result<()> {
        let grad = self.pending.take().expect("update called before serve");
        self.step_with_gradient(&grad)?;
        Ok(())
    }
}
