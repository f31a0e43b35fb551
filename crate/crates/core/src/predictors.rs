//! Predictions of the next batch.
//!
//! Most models corrupt the true next batch (the oracle is available in
//! trace-driven simulation); the history-based ones only look at past
//! batches. Every prediction carries predicted request counts and the
//! matching gradient `g~_i = -w_i r~_i`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{Catalog, GradientVector, RequestBatch};

/// Predicted counts of a batch and the gradient they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    counts: Vec<f64>,
    gradient: GradientVector,
}

impl Prediction {
    pub fn from_counts(catalog: &Catalog, counts: Vec<f64>) -> Result<Self> {
        let gradient = GradientVector::from_counts(catalog, &counts)?;
        Ok(Self { counts, gradient })
    }

    pub fn from_batch(catalog: &Catalog, batch: &RequestBatch) -> Result<Self> {
        Self::from_counts(catalog, batch.counts().iter().map(|&c| c as f64).collect())
    }

    /// No information: zero counts and zero gradient.
    pub fn zero(catalog: &Catalog) -> Self {
        let n = catalog.n_files();
        Self { counts: vec![0.0; n], gradient: GradientVector::zeros(n) }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn gradient(&self) -> &GradientVector {
        &self.gradient
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Counts rounded to integers with the largest-remainder rule, so the
    /// total is the rounded total of the real-valued counts.
    pub fn integer_counts(&self) -> Vec<u64> {
        round_counts(&self.counts)
    }
}

/// Largest-remainder rounding of nonnegative counts.
pub fn round_counts(counts: &[f64]) -> Vec<u64> {
    let clean: Vec<f64> = counts.iter().map(|c| c.max(0.0)).collect();
    let mut out: Vec<u64> = clean.iter().map(|c| c.floor() as u64).collect();
    let target = clean.iter().sum::<f64>().round() as u64;
    let assigned: u64 = out.iter().sum();
    let mut missing = target.saturating_sub(assigned) as usize;
    if missing > 0 {
        let mut order: Vec<usize> = (0..clean.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = clean[a] - clean[a].floor();
            let rb = clean[b] - clean[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for i in order {
            if missing == 0 {
                break;
            }
            out[i] += 1;
            missing -= 1;
        }
    }
    out
}

/// Mix of the true batch with a uniform one: `r~_i = (1 - xi) r_i + xi R / N`.
pub fn predict_type1(next: &RequestBatch, xi: f64, catalog: &Catalog) -> Result<Prediction> {
    check_len(catalog.n_files(), next.n_files())?;
    check_unit("xi", xi)?;
    let uniform = next.total() as f64 / next.n_files() as f64;
    let counts = next.counts().iter().map(|&r| (1.0 - xi) * r as f64 + xi * uniform).collect();
    Prediction::from_counts(catalog, counts)
}

/// Uniformly random permutation of the true gradient components.
pub fn predict_type2<R: Rng + ?Sized>(next: &RequestBatch, catalog: &Catalog, rng: &mut R) -> Result<Prediction> {
    check_len(catalog.n_files(), next.n_files())?;
    let mut perm: Vec<usize> = (0..next.n_files()).collect();
    perm.shuffle(rng);
    let truth = crate::model::gradient_from_batch(catalog, next)?;
    let gradient = GradientVector(perm.iter().map(|&j| truth.0[j]).collect());
    let counts = perm.iter().map(|&j| next.counts()[j] as f64).collect();
    Ok(Prediction { counts, gradient })
}

/// Keeps each request with probability `pi`, otherwise redirects it to a
/// uniformly random other file.
pub fn predict_type3<R: Rng + ?Sized>(
    next: &RequestBatch,
    pi: f64,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<Prediction> {
    check_len(catalog.n_files(), next.n_files())?;
    check_unit("pi", pi)?;
    let n = next.n_files();
    let mut counts = vec![0u64; n];
    for (file, &r) in next.counts().iter().enumerate() {
        for _ in 0..r {
            if n == 1 || rng.gen::<f64>() < pi {
                counts[file] += 1;
            } else {
                let j = rng.gen_range(0..n - 1);
                counts[if j >= file { j + 1 } else { j }] += 1;
            }
        }
    }
    Prediction::from_batch(catalog, &RequestBatch::new(counts))
}

/// Request counts observed over a warm-up window of length `tau0`, used to
/// predict the first batch of duration `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warmup {
    pub counts: Vec<f64>,
    pub tau0: f64,
    pub tau: f64,
}

/// Previous batch for `t > 1`; at `t = 1` the warm-up rate scaled to one
/// batch, `n_i(tau0) * tau / tau0`.
pub fn predict_previous_batch(
    previous: Option<&RequestBatch>,
    warmup: Option<&Warmup>,
    catalog: &Catalog,
) -> Result<Prediction> {
    match (previous, warmup) {
        (Some(batch), _) => Prediction::from_batch(catalog, batch),
        (None, Some(w)) => {
            if !(w.tau0 > 0.0 && w.tau > 0.0) {
                return Err(Error::Config("warm-up needs tau0 > 0 and tau > 0".into()));
            }
            let scale = w.tau / w.tau0;
            Prediction::from_counts(catalog, w.counts.iter().map(|c| c * scale).collect())
        }
        (None, None) => Err(Error::Config("previous-batch predictor needs a warm-up for the first batch".into())),
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorSpec {
    Perfect,
    Type1 {
        xi: f64,
    },
    Type2,
    Type3 {
        pi: f64,
    },
    /// Last observed batch; the first batch is predicted from `warmup`
    /// requests taken before the evaluated horizon.
    PreviousBatch {
        warmup: usize,
    },
    /// Expected batch under i.i.d. requests with the given per-batch means.
    /// Empty `means` are filled from the trace's popularity by the runner.
    PoissonMean {
        #[serde(default)]
        means: Vec<f64>,
    },
    None,
}

impl PredictorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PredictorSpec::Type1 { xi } => check_unit("xi", *xi),
            PredictorSpec::Type3 { pi } => check_unit("pi", *pi),
            PredictorSpec::PreviousBatch { warmup } if *warmup == 0 => {
                Err(Error::Config("previous_batch predictor needs warmup > 0".into()))
            }
            PredictorSpec::PoissonMean { means } if means.iter().any(|m| !(m.is_finite() && *m >= 0.0)) => {
                Err(Error::Config("poisson_mean needs finite nonnegative means".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Stateful, seeded predictor producing one prediction per batch in order.
#[derive(Debug, Clone)]
pub struct Predictor {
    spec: PredictorSpec,
    catalog: Catalog,
    rng: ChaCha8Rng,
    previous: Option<RequestBatch>,
    warmup: Option<Warmup>,
}

impl Predictor {
    pub fn new(spec: PredictorSpec, catalog: Catalog, seed: u64) -> Result<Self> {
        spec.validate()?;
        if let PredictorSpec::PoissonMean { means } = &spec {
            check_len(catalog.n_files(), means.len())?;
        }
        Ok(Self { spec, catalog, rng: ChaCha8Rng::seed_from_u64(seed), previous: None, warmup: None })
    }

    pub fn with_warmup(mut self, warmup: Warmup) -> Result<Self> {
        check_len(self.catalog.n_files(), warmup.counts.len())?;
        self.warmup = Some(warmup);
        Ok(self)
    }

    pub fn spec(&self) -> &PredictorSpec {
        &self.spec
    }

    /// Prediction for `next`, the batch about to be revealed. History-based
    /// models ignore `next` and use the batches passed to [`Self::observe`].
    pub fn predict(&mut self, next: &RequestBatch) -> Result<Prediction> {
        let catalog = &self.catalog;
        match &self.spec {
            PredictorSpec::Perfect => Prediction::from_batch(catalog, next),
            PredictorSpec::Type1 { xi } => predict_type1(next, *xi, catalog),
            PredictorSpec::Type2 => predict_type2(next, catalog, &mut self.rng),
            PredictorSpec::Type3 { pi } => predict_type3(next, *pi, catalog, &mut self.rng),
            PredictorSpec::PreviousBatch { .. } => {
                predict_previous_batch(self.previous.as_ref(), self.warmup.as_ref(), catalog)
            }
            PredictorSpec::PoissonMean { means } => Prediction::from_counts(catalog, means.clone()),
            PredictorSpec::None => Ok(Prediction::zero(catalog)),
        }
    }

    pub fn observe(&mut self, batch: &RequestBatch) {
        self.previous = Some(batch.clone());
    }
}
