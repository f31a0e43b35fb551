use std::cmp::Reverse;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{CacheState, Catalog, RequestBatch};
use crate::predictors::Prediction;

use super::CachePolicy;

/// How OLFU compensates a request that was not covered by the prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OlfuRule {
    /// Take one unit of credit from the file with the largest residual
    /// predicted credit (smallest index on ties).
    #[default]
    Credit,
    /// Decrement a uniformly random other file of the catalog.
    Random,
}

/// Least-frequently-used eviction with global request counters. With
/// predictions enabled it becomes OLFU: the predicted counts of the next
/// batch are credited upfront and reconciled request by request.
#[derive(Debug, Clone)]
pub struct LfuPolicy {
    catalog: Catalog,
    capacity: usize,
    freq: Vec<u64>,
    cached: Vec<bool>,
    /// Cached files ordered by (frequency, index).
    by_freq: BTreeSet<(u64, usize)>,
    optimistic: bool,
    rule: OlfuRule,
    credit: Vec<u64>,
    by_credit: BTreeSet<(Reverse<u64>, usize)>,
    rng: ChaCha8Rng,
    unreconciled: u64,
    x: CacheState,
}

impl LfuPolicy {
    /// Classic LFU starting from an empty cache.
    pub fn new(catalog: Catalog, capacity: usize) -> Result<Self> {
        let n = catalog.n_files();
        if capacity == 0 || capacity > n {
            return Err(Error::InvalidParameter(format!("capacity {capacity} is not in 1..={n}")));
        }
        Ok(Self {
            catalog,
            capacity,
            freq: vec![0; n],
            cached: vec![false; n],
            by_freq: BTreeSet::new(),
            optimistic: false,
            rule: OlfuRule::Credit,
            credit: vec![0; n],
            by_credit: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(0),
            unreconciled: 0,
            x: CacheState::from_raw(vec![0.0; n]),
        })
    }

    /// OLFU; `seed` drives the [`OlfuRule::Random`] reconciliation.
    pub fn optimistic(catalog: Catalog, capacity: usize, rule: OlfuRule, seed: u64) -> Result<Self> {
        let mut p = Self::new(catalog, capacity)?;
        p.optimistic = true;
        p.rule = rule;
        p.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(p)
    }

    /// Loads an integral initial state (files with `x_i = 1`).
    pub fn with_initial(mut self, x1: &CacheState) -> Result<Self> {
        check_len(self.freq.len(), x1.len())?;
        for (i, _) in x1.as_slice().iter().enumerate().filter(|(_, v)| **v == 1.0).take(self.capacity) {
            self.insert(i);
        }
        Ok(self)
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freq
    }

    pub fn residual_credit(&self) -> &[u64] {
        &self.credit
    }

    /// Mismatched requests for which no credit was left to take back.
    pub fn unreconciled(&self) -> u64 {
        self.unreconciled
    }

    pub fn cached_files(&self) -> Vec<usize> {
        (0..self.cached.len()).filter(|&i| self.cached[i]).collect()
    }

    pub fn is_cached(&self, file: usize) -> bool {
        self.cached[file]
    }

    /// Credits the predicted counts of the next batch. Residual credit of the
    /// previous batch is discarded.
    pub fn begin_batch(&mut self, predicted: &[u64]) -> Result<()> {
        check_len(self.freq.len(), predicted.len())?;
        self.by_credit.clear();
        for (i, &c) in predicted.iter().enumerate() {
            self.credit[i] = c;
            if c > 0 {
                self.by_credit.insert((Reverse(c), i));
                self.set_freq(i, self.freq[i] + c);
            }
        }
        Ok(())
    }

    /// Serves one request; returns `true` on a hit.
    pub fn serve_one(&mut self, file: usize) -> bool {
        let hit = self.cached[file];
        if self.optimistic && self.credit[file] > 0 {
            self.set_credit(file, self.credit[file] - 1);
        } else {
            self.set_freq(file, self.freq[file] + 1);
            if self.optimistic {
                self.reconcile(file);
            }
        }
        if !hit {
            if self.by_freq.len() == self.capacity {
                let victim = self.by_freq.iter().next().map(|&(_, i)| i).expect("full cache");
                self.remove(victim);
            }
            self.insert(file);
        }
        hit
    }

    fn reconcile(&mut self, file: usize) {
        let target = match self.rule {
            OlfuRule::Credit => self.by_credit.iter().map(|&(_, i)| i).find(|&i| i != file),
            OlfuRule::Random => {
                let n = self.freq.len();
                (n > 1).then(|| {
                    let j = self.rng.gen_range(0..n - 1);
                    if j >= file {
                        j + 1
                    } else {
                        j
                    }
                })
            }
        };
        match target {
            Some(j) if self.freq[j] > 0 => {
                if self.credit[j] > 0 {
                    self.set_credit(j, self.credit[j] - 1);
                }
                self.set_freq(j, self.freq[j] - 1);
            }
            _ => {
                self.unreconciled += 1;
                log::debug!("olfu: no predicted credit left to reconcile request for file {file}");
            }
        }
    }

    fn set_freq(&mut self, file: usize, value: u64) {
        if self.cached[file] {
            self.by_freq.remove(&(self.freq[file], file));
            self.by_freq.insert((value, file));
        }
        self.freq[file] = value;
    }

    fn set_credit(&mut self, file: usize, value: u64) {
        self.by_credit.remove(&(Reverse(self.credit[file]), file));
        if value > 0 {
            self.by_credit.insert((Reverse(value), file));
        }
        self.credit[file] = value;
    }

    fn insert(&mut self, file: usize) {
        self.cached[file] = true;
        self.by_freq.insert((self.freq[file], file));
        self.x.set(file, 1.0);
    }

    fn remove(&mut self, file: usize) {
        self.cached[file] = false;
        self.by_freq.remove(&(self.freq[file], file));
        self.x.set(file, 0.0);
    }
}

impl CachePolicy for LfuPolicy {
    fn name(&self) -> &'static str {
        if self.optimistic {
            "olfu"
        } else {
            "lfu"
        }
    }

    fn state(&self) -> &CacheState {
        &self.x
    }

    fn per_request(&self) -> bool {
        true
    }

    fn serve(&mut self, requests: &[usize], batch: &RequestBatch) -> Result<f64> {
        check_len(self.freq.len(), batch.n_files())?;
        let mut cost = 0.0;
        for &f in requests {
            if f >= self.freq.len() {
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
