//! Cost accounting against the best static state in hindsight.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{top_k_indices, CacheState, Catalog, RequestBatch};

/// One row of a per-run result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub t: usize,
    pub cost: f64,
    pub cum_cost: f64,
    pub miss_ratio: f64,
    pub regret: f64,
    pub avg_regret: f64,
    pub update_nanos: u64,
}

/// Which static state the running regret compares against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    /// One state, optimal over the whole horizon.
    #[default]
    Horizon,
    /// At each `t`, the state optimal over the first `t` batches.
    Prefix,
}

/// Weighted aggregate demand `w_i * sum_t r_{t,i}` over `batches`.
fn weighted_demand(catalog: &Catalog, batches: &[RequestBatch]) -> Result<Vec<f64>> {
    let mut demand = vec![0.0; catalog.n_files()];
    for b in batches {
        check_len(catalog.n_files(), b.n_files())?;
        for (d, (&r, w)) in demand.iter_mut().zip(b.counts().iter().zip(catalog.weights())) {
            *d += w * r as f64;
        }
    }
    Ok(demand)
}

/// Best static state over `batches` and its total cost. The cost is linear,
/// so the optimum is the vertex storing the `k` files of largest weighted
/// demand (smaller index on ties).
pub fn best_static(catalog: &Catalog, batches: &[RequestBatch], capacity: usize) -> Result<(CacheState, f64)> {
    if batches.is_empty() {
        return Err(Error::InvalidParameter("best static state needs at least one batch".into()));
    }
    let demand = weighted_demand(catalog, batches)?;
    let x = CacheState::top_k(&demand, capacity)?;
    let cost = demand.iter().zip(x.as_slice()).map(|(d, x)| d * (1.0 - x)).sum();
    Ok((x, cost))
}

/// Cumulative cost of the static benchmark after each batch.
pub fn static_cost_series(
    catalog: &Catalog,
    batches: &[RequestBatch],
    capacity: usize,
    benchmark: Benchmark,
) -> Result<Vec<f64>> {
    match benchmark {
        Benchmark::Horizon => {
            let (x, _) = best_static(catalog, batches, capacity)?;
            let mut acc = 0.0;
            batches
                .iter()
                .map(|b| {
                    acc += crate::model::batch_cost(catalog, b, &x)?;
                    Ok(acc)
                })
                .collect()
        }
        Benchmark::Prefix => {
            let mut demand = vec![0.0; catalog.n_files()];
            batches
                .iter()
                .map(|b| {
                    check_len(catalog.n_files(), b.n_files())?;
                    for (d, (&r, w)) in demand.iter_mut().zip(b.counts().iter().zip(catalog.weights())) {
                        *d += w * r as f64;
                    }
                    let total: f64 = demand.iter().sum();
                    let kept: f64 = top_k_indices(&demand, capacity).iter().map(|&i| demand[i]).sum();
                    Ok(total - kept)
                })
                .collect()
        }
    }
}

/// `regret_t = sum_{s<=t} cost_s - static cumulative cost at t`.
pub fn regret_series(
    costs: &[f64],
    catalog: &Catalog,
    batches: &[RequestBatch],
    capacity: usize,
    benchmark: Benchmark,
) -> Result<Vec<f64>> {
    check_len(batches.len(), costs.len())?;
    let statics = static_cost_series(catalog, batches, capacity, benchmark)?;
    let mut cum = 0.0;
    Ok(costs
        .iter()
        .zip(&statics)
        .map(|(c, s)| {
            cum += c;
            cum - s
        })
        .collect())
}

/// Update time per served request: `sum update_nanos / (R T)`.
pub fn amortized_cost(update_nanos: &[u64], batch_size: u64) -> f64 {
    if update_nanos.is_empty() || batch_size == 0 {
        return 0.0;
    }
    update_nanos.iter().map(|&v| v as f64).sum::<f64>() / (batch_size as f64 * update_nanos.len() as f64)
}

/// Assembles per-timeslot rows from a run's costs and update timings.
pub fn build_records(
    costs: &[f64],
    update_nanos: &[u64],
    catalog: &Catalog,
    batches: &[RequestBatch],
    capacity: usize,
    benchmark: Benchmark,
) -> Result<Vec<ExperimentRecord>> {
    check_len(costs.len(), update_nanos.len())?;
    let regret = regret_series(costs, catalog, batches, capacity, benchmark)?;
    let mut cum_cost = 0.0;
    let mut served = 0u64;
    Ok((0..costs.len())
        .map(|i| {
            cum_cost += costs[i];
            served += batches[i].total();
            let t = i + 1;
            ExperimentRecord {
                t,
                cost: costs[i],
                cum_cost,
                miss_ratio: if served > 0 { cum_cost / served as f64 } else { 0.0 },
                regret: regret[i],
                avg_regret: regret[i] / t as f64,
                update_nanos: update_nanos[i],
            }
        })
        .collect())
}
