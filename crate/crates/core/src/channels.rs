//! Token-level predictability channels and their document-level aggregates.
//!
//! Channel files are JSONL, one document per line:
//!
//! ```json
//! {"doc_id": "d1", "channels": ["gpt2_logp_obs", "gpt2_entropy"],
//!  "values": [[-3.1, 2.4], [-0.2, null]], "mask": [true, false]}
//! ```
//!
//! `values` is position-major. Positions with `mask = false` are ignored and
//! may hold `null`. Every document must use the same channel names in the
//! same order, have at most [`MAX_POSITIONS`] positions and at least one
//! valid position.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const MAX_POSITIONS: usize = 128;

pub const AGGREGATE_STATS: [&str; 4] = ["mean", "max", "min", "std"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSequence {
    pub doc_id: String,
    #[serde(rename = "channels")]
    pub channel_names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub mask: Vec<bool>,
}

impl ChannelSequence {
    pub fn validate(&self) -> Result<()> {
        let id = &self.doc_id;
        if self.values.len() > MAX_POSITIONS {
            return Err(Error::SequenceTooLong {
                doc_id: id.clone(),
                len: self.values.len(),
                cap: MAX_POSITIONS,
            });
        }
        if self.mask.len() != self.values.len() {
            return Err(Error::Channel(format!(
                "doc {id}: mask has {} entries for {} positions",
                self.mask.len(),
                self.values.len()
            )));
        }
        if self.channel_names.is_empty() {
            return Err(Error::Channel(format!("doc {id}: no channels")));
        }
        let mut names = HashSet::new();
        for name in &self.channel_names {
            if !names.insert(name) {
                return Err(Error::Channel(format!(
                    "doc {id}: channel {name} listed twice"
                )));
            }
        }
        if !self.mask.iter().any(|&m| m) {
            return Err(Error::Channel(format!("doc {id}: no valid positions")));
        }
        let k = self.channel_names.len();
        for (pos, (row, &valid)) in self.values.iter().zip(&self.mask).enumerate() {
            if row.len() != k {
                return Err(Error::Channel(format!(
                    "doc {id}: position {pos} has {} values for {k} channels",
                    row.len()
                )));
            }
            if valid {
                if let Some(c) = row.iter().position(|v| !v.is_some_and(f64::is_finite)) {
                    return Err(Error::NonFinite(format!(
                        "doc {id}, position {pos}, channel {}",
                        self.channel_names[c]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Values of channel `k` at valid positions, in position order.
    pub fn masked_values(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(move |(row, _)| row[k].expect("validated"))
    }
}

pub fn parse_channels(content: &str) -> Result<BTreeMap<String, ChannelSequence>> {
    let mut out = BTreeMap::new();
    let mut reference: Option<Vec<String>> = None;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let seq: ChannelSequence = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        seq.validate()?;
        match &reference {
            None => reference = Some(seq.channel_names.clone()),
            Some(names) if *names != seq.channel_names => {
                return Err(Error::Channel(format!(
                    "doc {} uses channels {:?}, expected {:?}",
                    seq.doc_id, seq.channel_names, names
                )))
            }
            Some(_) => {}
        }
        if out.contains_key(&seq.doc_id) {
            return Err(Error::DuplicateId {
                id: seq.doc_id,
                line: line_no,
            });
        }
        out.insert(seq.doc_id.clone(), seq);
    }
    Ok(out)
}

pub fn load_channels(path: impl AsRef<Path>) -> Result<BTreeMap<String, ChannelSequence>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channels(&content)
}

/// Mean, max, min and population std per channel, flattened channel-major:
/// `[c0_mean, c0_max, c0_min, c0_std, c1_mean, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedChannels {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

pub fn aggregate_feature_names(channel_names: &[String]) -> Vec<String> {
    channel_names
        .iter()
        .flat_map(|c| AGGREGATE_STATS.iter().map(move |s| format!("{c}_{s}")))
        .collect()
}

pub fn aggregate(seq: &ChannelSequence) -> AggregatedChannels {
    let k = seq.channel_names.len();
    let mut values = Vec::with_capacity(4 * k);
    for c in 0..k {
        let xs: Vec<f64> = seq.masked_values(c).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        // rounding can push the mean of near-constant data just outside [min, max]
        values.extend([mean.clamp(min, max), max, min, var.sqrt()]);
    }
    AggregatedChannels {
        names: aggregate_feature_names(&seq.channel_names),
        values,
    }
}

/// Aggregates for `doc_ids`, in that order. Every document needs a sequence.
pub fn aggregate_matrix(
    doc_ids: &[String],
    channels: &BTreeMap<String, ChannelSequence>,
) -> Result<FeatureMatrix> {
    let first = channels
        .values()
        .next()
        .ok_or_else(|| Error::Channel("channel file has no documents".into()))?;
    let names = aggregate_feature_names(&first.channel_names);
    let rows = doc_ids
        .iter()
        .map(|id| {
            channels
                .get(id)
                .map(|seq| aggregate(seq).values)
                .ok_or_else(|| Error::DocMismatch(format!("no channel sequence for document {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(names, doc_ids.to_vec(), rows)
}

/// Per-document columns computed outside the toolkit (for instance the class
/// probabilities of a separate predictor), read from a `doc_id,...` CSV.
pub type ExternalColumns = FeatureMatrix;

pub fn load_external_columns(path: impl AsRef<Path>) -> Result<ExternalColumns> {
    crate::matrix::read_feature_matrix(path)
}

/// Column-wise concatenation `stylo | agg | ext`. All parts must list the same
/// documents in the same order, and feature names must stay unique.
pub fn concat_features(
    stylo: &FeatureMatrix,
    agg: Option<&FeatureMatrix>,
    ext: Option<&ExternalColumns>,
) -> Result<FeatureMatrix> {
    let parts: Vec<&FeatureMatrix> = std::iter::once(stylo).chain(agg).chain(ext).collect();
    for part in &parts[1..] {
        if part.n_rows() != stylo.n_rows() {
            return Err(Error::DocMismatch(format!(
                "{} rows against {}",
                part.n_rows(),
                stylo.n_rows()
            )));
        }
        if let Some((a, b)) = stylo
            .doc_ids()
            .iter()
            .zip(part.doc_ids())
            .find(|(a, b)| a != b)
        {
            return Err(Error::DocMismatch(format!("expected {a}, found {b}")));
        }
    }
    let mut seen = HashSet::new();
    let mut names = Vec::new();
    for name in parts.iter().flat_map(|p| p.feature_names()) {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateFeature(name.clone()));
        }
        names.push(name.clone());
    }
    let rows = (0..stylo.n_rows())
        .map(|i| {
            parts
                .iter()
                .flat_map(|p| p.rows()[i].iter().copied())
                .collect()
        })
        .collect();
    FeatureMatrix::new(names, stylo.doc_ids().to_vec(), rows)
}
