//! Assembling document feature matrices from a corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channels::{aggregate_matrix, concat_features, ChannelSequence, ExternalColumns};
use crate::corpus::{Corpus, Lang};
use crate::error::{Error, Result};
use crate::lexicon::Lexicons;
use crate::matrix::FeatureMatrix;
use crate::stylometry::{extract_stylo, STYLO_FEATURE_NAMES};
use crate::tokenizer::tokenize;

/// Which feature blocks go into the matrix. Stylometric features are always
/// present; `agg` adds aggregated channels and `ext` external columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSet {
    pub agg: bool,
    pub ext: bool,
}

impl FeatureSet {
    pub const STYLO: FeatureSet = FeatureSet {
        agg: false,
        ext: false,
    };
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("stylo")?;
        if self.agg {
            f.write_str("+agg")?;
        }
        if self.ext {
            f.write_str("+ext")?;
        }
        Ok(())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = FeatureSet::STYLO;
        let mut has_stylo = false;
        for part in s.split('+').map(str::trim) {
            match part {
                "stylo" => has_stylo = true,
                "agg" => set.agg = true,
                "ext" => set.ext = true,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown feature block {other:?}"
                    )))
                }
            }
        }
        if !has_stylo {
            return Err(Error::InvalidArgument(format!(
                "feature set {s:?} must include stylo"
            )));
        }
        Ok(set)
    }
}

pub fn stylo_feature_names() -> Vec<String> {
    STYLO_FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Stylometric matrix for `corpus`. Each document uses its own language
/// unless `lang` overrides it.
pub fn stylo_matrix(corpus: &Corpus, lexicons: &Lexicons, lang: Option<Lang>) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let lang = lang.unwrap_or(doc.lang);
            let tok = tokenize(&doc.text);
            if tok.is_empty() {
                log::warn!(
                    "document {} has no word tokens; stylometric features set to 0",
                    doc.id
                );
            }
            extract_stylo(&tok, lexicons.get(lang), lang)
                .to_array()
                .to_vec()
        })
        .collect();
    FeatureMatrix::new(stylo_feature_names(), corpus.doc_ids(), rows)
        .expect("stylometric features are finite")
}

/// Inputs needed to turn a corpus into a full feature matrix.
pub struct FeatureBuilder {
    pub set: FeatureSet,
    pub lexicons: Lexicons,
    pub lang: Option<Lang>,
    pub channels: Option<BTreeMap<String, ChannelSequence>>,
    pub ext: Option<ExternalColumns>,
}

impl FeatureBuilder {
    pub fn new(set: FeatureSet, lexicons: Lexicons) -> Self {
        FeatureBuilder {
            set,
            lexicons,
            lang: None,
            channels: None,
            ext: None,
        }
    }

    pub fn build(&self, corpus: &Corpus) -> Result<FeatureMatrix> {
        let stylo = stylo_matrix(corpus, &self.lexicons, self.lang);
        let ids = corpus.doc_ids();
        let agg = if self.set.agg {
            let channels = self
                .channels
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("feature set needs a channel file".into()))?;
            Some(aggregate_matrix(&ids, channels)?)
        } else {
            None
        };
        let ext = if self.set.ext {
            let ext = self.ext.as_ref().ok_or_else(|| {
                Error::InvalidArgument("feature set needs external columns".into())
            })?;
            Some(ext.select(&ids)?)
        } else {
            None
        };
        concat_features(&stylo, agg.as_ref(), ext.as_ref())
    }
}
