//! Request streams: i.i.d. Zipf generation, trace files, and batching.
//!
//! A trace file holds one file id per line. CSV logs can be read by
//! selecting the column that carries the id.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RequestBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipfSpec {
    pub n_files: usize,
    pub beta: f64,
    pub n_requests: usize,
    pub seed: u64,
}

/// Zipf popularity `p_i = i^-beta / sum_j j^-beta` over ranks `1..=n`;
/// file id `i - 1` has rank `i`.
pub fn zipf_pmf(n_files: usize, beta: f64) -> Vec<f64> {
    let w = zipf_weights(n_files, beta);
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Unnormalized Zipf weights `i^-beta`.
pub(crate) fn zipf_weights(n_files: usize, beta: f64) -> Vec<f64> {
    (1..=n_files).map(|i| (i as f64).powf(-beta)).collect()
}

/// Draws `n_requests` file ids i.i.d. from the Zipf law.
pub fn generate_zipf(spec: &ZipfSpec) -> Result<Vec<usize>> {
    if spec.n_files == 0 {
        return Err(Error::InvalidParameter("Zipf catalog must hold at least one file".into()));
    }
    if !(spec.beta.is_finite() && spec.beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("Zipf exponent {} must be >= 0", spec.beta)));
    }
    let dist = WeightedIndex::new(zipf_weights(spec.n_files, spec.beta))
        .map_err(|e| Error::InvalidParameter(format!("Zipf weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.n_requests).map(|_| dist.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batching {
    pub batches: Vec<RequestBatch>,
    /// Requests of the trailing partial window, not part of any batch.
    pub dropped: usize,
}

/// Folds consecutive windows of `batch_size` requests into count vectors.
/// A trailing partial window is dropped so every batch holds exactly
/// `batch_size` requests.
pub fn batch_requests(seq: &[usize], n_files: usize, batch_size: usize) -> Result<Batching> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let batches =
        seq.chunks_exact(batch_size).map(|w| RequestBatch::from_requests(w, n_files)).collect::<Result<Vec<_>>>()?;
    let dropped = seq.len() % batch_size;
    if dropped > 0 {
        log::info!("dropping {dropped} trailing requests that do not fill a batch of {batch_size}");
    }
    Ok(Batching { batches, dropped })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum TraceFormat {
    /// One integer id per line; blank lines are skipped.
    #[default]
    Lines,
    /// Delimited records with the id in column `column` (0-based).
    Csv {
        column: usize,
        #[serde(default)]
        has_header: bool,
        #[serde(default = "default_delimiter")]
        delimiter: char,
    },
}

fn default_delimiter() -> char {
    ','
}

pub fn load_trace(path: &Path, n_files: usize, format: &TraceFormat) -> Result<Vec<usize>> {
    read_trace(File::open(path)?, n_files, format)
}

pub fn read_trace<R: Read>(reader: R, n_files: usize, format: &TraceFormat) -> Result<Vec<usize>> {
    match format {
        TraceFormat::Lines => {
            let mut out = Vec::new();
            for (idx, line) in BufReader::new(reader).lines().enumerate() {
                let line = line?;
                let token = line.trim();
                if token.is_empty() {
                    continue;
                }
                out.push(parse_id(token, idx + 1, n_files)?);
            }
            Ok(out)
        }
        TraceFormat::Csv { column, has_header, delimiter } => {
            let delimiter = u8::try_from(*delimiter)
                .map_err(|_| Error::Config(format!("CSV delimiter {delimiter:?} must be ASCII")))?;
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(*has_header)
                .delimiter(delimiter)
                .flexible(true)
                .from_reader(reader);
            let mut out = Vec::new();
            for record in rdr.records() {
                let record = record?;
                let line = record.position().map_or(0, |p| p.line() as usize);
                let token = record
                    .get(*column)
                    .ok_or_else(|| Error::Parse { line, msg: format!("missing column {column}") })?;
                out.push(parse_id(token.trim(), line, n_files)?);
            }
            Ok(out)
        }
    }
}

fn parse_id(token: &str, line: usize, n_files: usize) -> Result<usize> {
    let id: usize = token.parse().map_err(|_| Error::Parse { line, msg: format!("`{token}` is not a file id") })?;
    if id >= n_files {
        return Err(Error::IdOutOfRange { line, id, n_files });
    }
    Ok(id)
}

/// Writes `seq` in the line format read by [`load_trace`].
pub fn write_trace(path: &Path, seq: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for id in seq {
        writeln!(w, "{id}")?;
    }
    w.flush()?;
    Ok(())
}
