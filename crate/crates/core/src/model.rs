//! Domain types shared by every module: the catalog, the cache
//! configuration, fractional cache states, request batches and cost
//! gradients.
//!
//! A cache state is a point of the capped simplex
//! `{x in [0,1]^N : sum_i x_i = k}`; the cost of serving a batch `r` from
//! state `x` is `sum_i w_i r_i (1 - x_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Relative tolerance (per file) on the capacity constraint of a cache state.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Files of equal size, each with a nonnegative retrieval cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    weights: Vec<f64>,
}

impl Catalog {
    /// Catalog of `n_files` files with unit retrieval cost.
    pub fn uniform(n_files: usize) -> Result<Self> {
        Self::with_weights(vec![1.0; n_files])
    }

    pub fn with_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("catalog must hold at least one file".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weight of file {i} must be a finite nonnegative number, got {}",
                weights[i]
            )));
        }
        Ok(Self { weights })
    }

    pub fn n_files(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, file: usize) -> f64 {
        self.weights[file]
    }

    /// `max_i w_i`
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Euclidean norm of the weight vector.
    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Cache capacity `k` for a catalog of `N` files, `1 <= k <= N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    capacity: usize,
    n_files: usize,
}

impl CacheConfig {
    pub fn new(capacity: usize, n_files: usize) -> Result<Self> {
        if capacity == 0 || capacity > n_files {
            return Err(Error::InvalidParameter(format!(
                "capacity must satisfy 1 <= k <= N (k = {capacity}, N = {n_files})"
            )));
        }
        Ok(Self { capacity, n_files })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    /// Relative cache size `k / N`.
    pub fn alpha(&self) -> f64 {
        self.capacity as f64 / self.n_files as f64
    }
}

/// Fraction of each file stored in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheState {
    x: Vec<f64>,
}

impl CacheState {
    /// Validates `x` against the capped simplex of capacity `capacity`.
    pub fn new(x: Vec<f64>, capacity: usize) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::InfeasibleState("empty state".into()));
        }
        if let Some(i) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InfeasibleState(format!("x[{i}] = {} is outside [0, 1]", x[i])));
        }
        let total: f64 = x.iter().sum();
        if (total - capacity as f64).abs() > FEASIBILITY_TOL * n as f64 {
            return Err(Error::InfeasibleState(format!("allocations sum to {total}, expected {capacity}")));
        }
        Ok(Self { x })
    }

    pub(crate) fn from_raw(x: Vec<f64>) -> Self {
        Self { x }
    }

    pub(crate) fn set(&mut self, file: usize, value: f64) {
        self.x[file] = value;
    }

    /// `x_i = k / N` for every file.
    pub fn uniform(config: &CacheConfig) -> Self {
        Self { x: vec![config.alpha(); config.n_files()] }
    }

    /// Integral state storing the `k` files with the largest `score`,
    /// ties broken towards the smaller index.
    pub fn top_k(score: &[f64], capacity: usize) -> Result<Self> {
        if capacity == 0 || capacity > score.len() {
            return Err(Error::InvalidParameter(format!("capacity {capacity} is not in 1..={}", score.len())));
        }
        let mut x = vec![0.0; score.len()];
        for i in top_k_indices(score, capacity) {
            x[i] = 1.0;
        }
        Ok(Self { x })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_integral(&self) -> bool {
        self.x.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Indices of the `k` largest scores; equal scores prefer the smaller index.
pub fn top_k_indices(score: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Per-file request counts of one timeslot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestBatch {
    counts: Vec<u64>,
    total: u64,
}

impl RequestBatch {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    /// Counts the occurrences of each file id in `requests`.
    pub fn from_requests(requests: &[usize], n_files: usize) -> Result<Self> {
        let mut counts = vec![0u64; n_files];
        for &f in requests {
            if f >= n_files {
                return Err(Error::InvalidParameter(format!("file id {f} outside catalog of {n_files} files")));
            }
            counts[f] += 1;
        }
        Ok(Self::new(counts))
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_files(&self) -> usize {
        self.counts.len()
    }

    /// Largest per-file count in the batch.
    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// Gradient of the batch cost (or a prediction of it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// `g_i = -w_i * c_i` for (possibly fractional) request counts `c`.
    pub fn from_counts(catalog: &Catalog, counts: &[f64]) -> Result<Self> {
        check_len(catalog.n_files(), counts.len())?;
        Ok(Self(catalog.weights().iter().zip(counts).map(|(w, c)| -w * c).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &GradientVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Cost gradient of a batch: `g_i = -w_i r_i`.
pub fn gradient_from_batch(catalog: &Catalog, batch: &RequestBatch) -> Result<GradientVector> {
    check_len(catalog.n_files(), batch.n_files())?;
    Ok(GradientVector(catalog.weights().iter().zip(batch.counts()).map(|(w, &r)| -w * r as f64).collect()))
}

/// Cost of serving `batch` from `state`: `sum_i w_i r_i (1 - x_i)`.
pub fn batch_cost(catalog: &Catalog, batch: &RequestBatch, state: &CacheState) -> Result<f64> {
    check_len(catalog.n_files(), batch.n_files())?;
    check_len(catalog.n_files(), state.len())?;
    Ok(catalog
        .weights()
        .iter()
        .zip(batch.counts())
        .zip(state.as_slice())
        .map(|((w, &r), x)| w * r as f64 * (1.0 - x))
        .sum())
}
