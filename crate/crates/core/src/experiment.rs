//! End-to-end experiment protocol: split the training corpus, build
//! features, train a forest, score the validation and test sets, explain the
//! model and write every artifact to one output directory.
//!
//! Configuration is TOML with `[data]`, `[features]`, `[model]` and `[eval]`
//! sections. Relative paths are resolved against the config file's directory.
//!
//! ```toml
//! [data]
//! train = "train.jsonl"
//! test = "test.jsonl"
//! validation_fraction = 0.2
//!
//! [features]
//! set = "stylo+ext"
//! ext_columns = "pred_out.csv"
//!
//! [model]
//! trees = 200
//! max_depth = 60
//! seed = 10
//!
//! [eval]
//! output_dir = "runs/stylo_ext"
//! shap_rows = "validation"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::{load_channels, load_external_columns};
use crate::corpus::{load_corpus, split_train_validation, Corpus, CorpusFormat, Lang};
use crate::error::{Error, Result, StageExt};
use crate::eval::{EvalReport, ReportMetadata};
use crate::features::{FeatureBuilder, FeatureSet};
use crate::forest::{argmax, Forest, ForestParams, MaxFeatures};
use crate::lexicon::Lexicons;
use crate::matrix::{write_feature_matrix, FeatureMatrix};
use crate::treeshap::{importance_report, ImportanceReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<CorpusFormat>,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub lang: Option<Lang>,
    #[serde(default)]
    pub lexicon_dir: Option<PathBuf>,
}

fn default_validation_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesConfig {
    #[serde(default = "default_feature_set")]
    pub set: String,
    #[serde(default)]
    pub channels: Option<PathBuf>,
    #[serde(default)]
    pub ext_columns: Option<PathBuf>,
}

fn default_feature_set() -> String {
    "stylo".into()
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            set: default_feature_set(),
            channels: None,
            ext_columns: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_trees")]
    pub trees: usize,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_min_samples_leaf")]
    pub min_samples_leaf: usize,
}

fn default_trees() -> usize {
    200
}
fn default_max_depth() -> usize {
    60
}
fn default_seed() -> u64 {
    10
}
fn default_min_samples_leaf() -> usize {
    1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            trees: default_trees(),
            max_depth: default_max_depth(),
            seed: default_seed(),
            min_samples_leaf: default_min_samples_leaf(),
        }
    }
}

impl ModelConfig {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapRows {
    Train,
    Validation,
    Test,
}

impl fmt::Display for ShapRows {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapRows::Train => "train",
            ShapRows::Validation => "validation",
            ShapRows::Test => "test",
        })
    }
}

impl FromStr for ShapRows {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(ShapRows::Train),
            "validation" => Ok(ShapRows::Validation),
            "test" => Ok(ShapRows::Test),
            other => Err(Error::InvalidArgument(format!(
                "unknown row source {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_shap_rows")]
    pub shap_rows: ShapRows,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("experiment_out")
}
fn default_shap_rows() -> ShapRows {
    ShapRows::Validation
}
fn default_top_k() -> usize {
    20
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            output_dir: default_output_dir(),
            shap_rows: default_shap_rows(),
            top_k: default_top_k(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn parse(source: &str) -> Result<Self> {
        toml::from_str(source).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&source)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        self.data.test.as_mut().map(fix);
        self.data.lexicon_dir.as_mut().map(fix);
        self.features.channels.as_mut().map(fix);
        self.features.ext_columns.as_mut().map(fix);
        fix(&mut self.eval.output_dir);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub feature_set: String,
    pub feature_names: Vec<String>,
    pub model_hash: String,
    pub shap_rows: String,
    pub validation: EvalReport,
    pub test: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub importance: ImportanceReport,
    pub output_dir: PathBuf,
}

fn load(path: &Path, format: Option<CorpusFormat>) -> Result<Corpus> {
    load_corpus(
        path,
        format.unwrap_or_else(|| CorpusFormat::from_path(path)),
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Class index per document of `corpus` under `classes`, failing on any
/// unlabeled document or label outside `classes`.
pub fn labels_under(corpus: &Corpus, classes: &[String]) -> Result<Vec<usize>> {
    corpus
        .documents()
        .iter()
        .map(|d| {
            let label = d
                .label
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("document {} has no label", d.id)))?;
            classes
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| Error::UnknownLabel(label.clone()))
        })
        .collect()
}

pub fn predictions_csv(forest: &Forest, doc_ids: &[String], proba: &[Vec<f64>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header = ["doc_id".to_string(), "predicted".to_string()]
        .into_iter()
        .chain(forest.classes.iter().map(|c| format!("prob_{c}")));
    w.write_record(header).expect("in-memory write");
    for (id, p) in doc_ids.iter().zip(proba) {
        let record = [id.clone(), forest.classes[argmax(p)].clone()]
            .into_iter()
            .chain(p.iter().map(|v| format!("{v:.16e}")));
        w.write_record(record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let set: FeatureSet = cfg.features.set.parse().stage("config")?;
    let params = cfg.model.params();

    let corpus = load(&cfg.data.train, cfg.data.format).stage("load train corpus")?;
    let test = cfg
        .data
        .test
        .as_ref()
        .map(|p| load(p, cfg.data.format))
        .transpose()
        .stage("load test corpus")?;
    let (train, validation) =
        split_train_validation(&corpus, cfg.data.validation_fraction, params.seed)
            .stage("split")?;
    let classes = corpus.classes().to_vec();

    let mut builder = FeatureBuilder::new(
        set,
        match &cfg.data.lexicon_dir {
            Some(dir) => Lexicons::load_or_builtin(dir).stage("lexicons")?,
            None => Lexicons::builtin(),
        },
    );
    builder.lang = cfg.data.lang;
    if set.agg {
        let path = cfg
            .features
            .channels
            .as_ref()
            .ok_or_else(|| Error::Config("feature set needs features.channels".into()))
            .stage("config")?;
        builder.channels = Some(load_channels(path).stage("load channels")?);
    }
    if set.ext {
        let path = cfg
            .features
            .ext_columns
            .as_ref()
            .ok_or_else(|| Error::Config("feature set needs features.ext_columns".into()))
            .stage("config")?;
        builder.ext = Some(load_external_columns(path).stage("load external columns")?);
    }

    let out = &cfg.eval.output_dir;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::io(out, e))
        .stage("output directory")?;

    let train_x = builder.build(&train).stage("features")?;
    let val_x = builder.build(&validation).stage("features")?;
    let test_x = test
        .as_ref()
        .map(|t| builder.build(t))
        .transpose()
        .stage("features")?;
    write_feature_matrix(&train_x, out.join("features_train.csv")).stage("write features")?;
    write_feature_matrix(&val_x, out.join("features_validation.csv")).stage("write features")?;
    if let Some(x) = &test_x {
        write_feature_matrix(x, out.join("features_test.csv")).stage("write features")?;
    }

    let train_y = labels_under(&train, &classes).stage("train")?;
    log::info!(
        "training {} trees on {} documents x {} features",
        params.n_trees,
        train_x.n_rows(),
        train_x.n_features()
    );
    let forest = Forest::fit(&train_x, &train_y, &classes, params).stage("train")?;
    let model_json = forest.to_json();
    let model_hash = sha256_hex(model_json.as_bytes());
    write(out, "model.json", &model_json).stage("save model")?;

    let metadata = |split: &str| ReportMetadata {
        seed: params.seed,
        validation_fraction: cfg.data.validation_fraction,
        feature_set: set.to_string(),
        n_features: train_x.n_features(),
        model_hash: model_hash.clone(),
        split: split.to_string(),
    };
    let score = |corpus: &Corpus, x: &FeatureMatrix, split: &str| -> Result<Option<EvalReport>> {
        let proba = forest.predict_matrix(x)?;
        write(
            out,
            &format!("predictions_{split}.csv"),
            predictions_csv(&forest, x.doc_ids(), &proba),
        )?;
        if !corpus.is_labeled() {
            return Ok(None);
        }
        let gold = labels_under(corpus, &classes)?;
        let pred: Vec<usize> = proba.iter().map(|p| argmax(p)).collect();
        EvalReport::from_indices(&gold, &pred, &classes, metadata(split)).map(Some)
    };
    let val_report = score(&validation, &val_x, "validation")
        .stage("evaluate")?
        .expect("validation split is labeled");
    let test_report = match (&test, &test_x) {
        (Some(t), Some(x)) => score(t, x, "test").stage("evaluate")?,
        _ => None,
    };

    let shap_matrix = match cfg.eval.shap_rows {
        ShapRows::Train => &train_x,
        ShapRows::Validation => &val_x,
        ShapRows::Test => test_x
            .as_ref()
            .ok_or_else(|| Error::Config("shap_rows = \"test\" needs data.test".into()))
            .stage("explain")?,
    };
    let importance = importance_report(&forest, shap_matrix, &cfg.eval.shap_rows.to_string())
        .stage("explain")?;
    write(out, "shap.csv", importance.to_csv()).stage("explain")?;
    write(out, "shap.txt", importance.top_k_table(cfg.eval.top_k)).stage("explain")?;

    let report = ExperimentReport {
        feature_set: set.to_string(),
        feature_names: train_x.feature_names().to_vec(),
        model_hash,
        shap_rows: cfg.eval.shap_rows.to_string(),
        validation: val_report,
        test: test_report,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(out, "report.json", json + "\n").stage("write report")?;
    let mut text = report.validation.to_text();
    if let Some(t) = &report.test {
        text.push('\n');
        text.push_str(&t.to_text());
    }
    write(out, "report.txt", text).stage("write report")?;

    Ok(ExperimentOutcome {
        report,
        importance,
        output_dir: out.clone(),
    })
}
