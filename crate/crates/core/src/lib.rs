//! Attribution of texts to human or machine authors from document-level
//! stylometric features and aggregated token-predictability channels.
//!
//! The pipeline is: [`corpus`] loading, [`tokenizer`] and [`stylometry`]
//! features, optional [`channels`] aggregates and external columns, a
//! [`forest`] classifier, [`treeshap`] explanations and [`eval`] metrics.
//! [`experiment`] wires these together behind a TOML config.

pub mod channels;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod forest;
pub mod lexicon;
pub mod matrix;
pub mod rng;
pub mod stats;
pub mod stylometry;
pub mod tokenizer;
pub mod treeshap;

pub use error::{Error, Result};
