//! Online caching policies behind a single interface.
//!
//! Each timeslot the runner hands a policy the batch of requests (served
//! against the state chosen before the batch was revealed), then the
//! prediction of the next batch, from which the policy computes its next
//! state.

mod ftrl;
mod lfu;
mod lru;
mod ogd;

pub use ftrl::{ObcPolicy, PcocPolicy};
pub use lfu::{LfuPolicy, OlfuRule};
pub use lru::LruPolicy;
pub use ogd::{ogd_step_size, OgdPolicy};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{CacheState, RequestBatch};
use crate::predictors::Prediction;

pub trait CachePolicy: Send {
    fn name(&self) -> &'static str;

    /// State that will serve the next batch.
    fn state(&self) -> &CacheState;

    /// Whether the policy changes its state request by request inside a
    /// batch (LFU/LRU family) instead of once per batch.
    fn per_request(&self) -> bool {
        false
    }

    /// Serves `requests` (in arrival order; `batch` holds their counts) and
    /// returns the incurred retrieval cost.
    fn serve(&mut self, requests: &[usize], batch: &RequestBatch) -> Result<f64>;

    /// Receives the prediction for the next batch and computes the next state.
    fn update(&mut self, next: &Prediction) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Obc,
    Pcoc,
    Ogd,
    Lfu,
    Olfu,
    Lru,
    Olru,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Obc => "obc",
            PolicyKind::Pcoc => "pcoc",
            PolicyKind::Ogd => "ogd",
            PolicyKind::Lfu => "lfu",
            PolicyKind::Olfu => "olfu",
            PolicyKind::Lru => "lru",
            PolicyKind::Olru => "olru",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "obc" => PolicyKind::Obc,
            "pcoc" => PolicyKind::Pcoc,
            "ogd" => PolicyKind::Ogd,
            "lfu" => PolicyKind::Lfu,
            "olfu" => PolicyKind::Olfu,
            "lru" => PolicyKind::Lru,
            "olru" => PolicyKind::Olru,
            other => return Err(crate::Error::Config(format!("unknown policy `{other}`"))),
        })
    }
}
