use std::collections::BTreeSet;

use crate::error::{check_len, Error, Result};
use crate::model::{CacheState, Catalog, RequestBatch};
use crate::predictors::Prediction;

use super::CachePolicy;

/// Least-recently-used eviction driven by per-file last-request stamps.
/// With predictions enabled it becomes OLRU: files predicted for the next
/// batch have their stamp refreshed to the current clock.
#[derive(Debug, Clone)]
pub struct LruPolicy {
    catalog: Catalog,
    capacity: usize,
    last: Vec<u64>,
    clock: u64,
    cached: Vec<bool>,
    by_age: BTreeSet<(u64, usize)>,
    optimistic: bool,
    x: CacheState,
}

impl LruPolicy {
    pub fn new(catalog: Catalog, capacity: usize) -> Result<Self> {
        let n = catalog.n_files();
        if capacity == 0 || capacity > n {
            return Err(Error::InvalidParameter(format!("capacity {capacity} is not in 1..={n}")));
        }
        Ok(Self {
            catalog,
            capacity,
            last: vec![0; n],
            clock: 0,
            cached: vec![false; n],
            by_age: BTreeSet::new(),
            optimistic: false,
            x: CacheState::from_raw(vec![0.0; n]),
        })
    }

    pub fn optimistic(catalog: Catalog, capacity: usize) -> Result<Self> {
        let mut p = Self::new(catalog, capacity)?;
        p.optimistic = true;
        Ok(p)
    }

    pub fn with_initial(mut self, x1: &CacheState) -> Result<Self> {
        check_len(self.last.len(), x1.len())?;
        for (i, _) in x1.as_slice().iter().enumerate().filter(|(_, v)| **v == 1.0).take(self.capacity) {
            self.cached[i] = true;
            self.by_age.insert((self.last[i], i));
            self.x.set(i, 1.0);
        }
        Ok(self)
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn last_requested(&self) -> &[u64] {
        &self.last
    }

    pub fn cached_files(&self) -> Vec<usize> {
        (0..self.cached.len()).filter(|&i| self.cached[i]).collect()
    }

    /// Marks every file with a positive predicted count as requested now.
    pub fn begin_batch(&mut self, predicted: &[u64]) -> Result<()> {
        check_len(self.last.len(), predicted.len())?;
        for (i, &c) in predicted.iter().enumerate() {
            if c > 0 {
                self.stamp(i, self.clock);
            }
        }
        Ok(())
    }

    /// Serves one request; returns `true` on a hit.
    pub fn serve_one(&mut self, file: usize) -> bool {
        let hit = self.cached[file];
        self.clock += 1;
        self.stamp(file, self.clock);
        if !hit {
            if self.by_age.len() == self.capacity {
                let &(_, victim) = self.by_age.iter().next().expect("full cache");
                self.by_age.remove(&(self.last[victim], victim));
                self.cached[victim] = false;
                self.x.set(victim, 0.0);
            }
            self.cached[file] = true;
            self.by_age.insert((self.last[file], file));
            self.x.set(file, 1.0);
        }
        hit
    }

    fn stamp(&mut self, file: usize, time: u64) {
        if self.cached[file] {
            self.by_age.remove(&(self.last[file], file));
            self.by_age.insert((time, file));
        }
        self.last[file] = time;
    }
}

impl CachePolicy for LruPolicy {
    fn name(&self) -> &'static str {
        if self.optimistic {
            "olru"
        } else {
            "lru"
        }
    }

    fn state(&self) -> &CacheState {
        &self.x
    }

    fn per_request(&self) -> bool {
        true
    }

    fn serve(&mut self, requests: &[usize], batch: &RequestBatch) -> Result<f64> {
        check_len(self.last.len(), batch.n_files())?;
        let mut cost = 0.0;
        for &f in requests {
            if f >= self.last.len() {
                return Err(Error::InvalidParameter(format!("file id {f} outside catalog")));
            }
            if !self.serve_one(f) {
                cost += self.catalog.weight(f);
            }
        }
        Ok(cost)
    }

    fn update(&mut self, next: &Prediction) -> Result<()> {
        if self.optimistic {
            self.begin_batch(&next.integer_counts())?;
        }
        Ok(())
    }
}
