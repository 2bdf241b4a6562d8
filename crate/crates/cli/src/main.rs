use std::io::Write;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use attrib::channels::{aggregate_matrix, load_channels, load_external_columns};
use attrib::corpus::{load_corpus, Corpus, CorpusFormat, Lang};
use attrib::error::{Error, Result};
use attrib::eval::{EvalReport, ReportMetadata};
use attrib::experiment::{
    labels_under, predictions_csv, run_experiment, sha256_hex, ExperimentConfig,
};
use attrib::features::{FeatureBuilder, FeatureSet};
use attrib::forest::{argmax, load_model, Forest, ForestParams, MaxFeatures};
use attrib::lexicon::Lexicons;
use attrib::matrix::{feature_matrix_to_csv, FeatureMatrix};
use attrib::treeshap::importance_report;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (model format 1)");

#[derive(Parser, Debug)]
#[command(name = "attrib", version = VERSION, about = "Stylometric attribution of human and machine-generated text")]
struct Cli {
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the feature matrix of a corpus as CSV
    Extract {
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate a channel JSONL file into mean/max/min/std columns
    Aggregate {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a random forest on a labeled corpus
    Train {
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Class probabilities for every document of a corpus
    Predict {
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Mean |SHAP| per feature and class over a corpus
    Explain {
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also print the top-k table to stderr
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Score a model on a labeled corpus and write a JSON report
    Evaluate {
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a full experiment from a TOML config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides eval.output_dir)
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// Corpus file (JSONL or TSV)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_format)]
    format: Option<CorpusFormat>,
    /// Force a language for every document
    #[arg(long, value_parser = parse_lang)]
    lang: Option<Lang>,
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
    /// Channel JSONL; adds aggregated channel columns
    #[arg(long)]
    channels: Option<PathBuf>,
    /// CSV of extra per-document columns keyed by doc_id
    #[arg(long)]
    ext_columns: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 60)]
    max_depth: usize,
    #[arg(long, default_value_t = 10)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
}

fn parse_format(s: &str) -> std::result::Result<CorpusFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_lang(s: &str) -> std::result::Result<Lang, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl FeatureArgs {
    fn corpus(&self) -> Result<Corpus> {
        let format = self
            .format
            .unwrap_or_else(|| CorpusFormat::from_path(&self.input));
        load_corpus(&self.input, format)
    }

    fn builder(&self) -> Result<FeatureBuilder> {
        let set = FeatureSet {
            agg: self.channels.is_some(),
            ext: self.ext_columns.is_some(),
        };
        let lexicons = match &self.lexicon_dir {
            Some(dir) => Lexicons::load_or_builtin(dir)?,
            None => Lexicons::builtin(),
        };
        let mut builder = FeatureBuilder::new(set, lexicons);
        builder.lang = self.lang;
        if let Some(path) = &self.channels {
            builder.channels = Some(load_channels(path)?);
        }
        if let Some(path) = &self.ext_columns {
            builder.ext = Some(load_external_columns(path)?);
        }
        Ok(builder)
    }

    fn load(&self) -> Result<(Corpus, FeatureMatrix)> {
        let corpus = self.corpus()?;
        let matrix = self.builder()?.build(&corpus)?;
        Ok((corpus, matrix))
    }
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { features, output } => {
            let (_, matrix) = features.load()?;
            emit(output.as_deref(), &feature_matrix_to_csv(&matrix))
        }
        Command::Aggregate { channels, output } => {
            let map = load_channels(&channels)?;
            let ids: Vec<String> = map.keys().cloned().collect();
            let matrix = aggregate_matrix(&ids, &map)?;
            emit(output.as_deref(), &feature_matrix_to_csv(&matrix))
        }
        Command::Train {
            features,
            model,
            output,
        } => {
            let (corpus, matrix) = features.load()?;
            let labels = corpus.label_indices()?;
            let params = ForestParams {
                n_trees: model.trees,
                max_depth: model.max_depth,
                min_samples_leaf: model.min_samples_leaf,
                max_features: MaxFeatures::Sqrt,
                bootstrap: true,
                seed: model.seed,
            };
            let forest = Forest::fit(&matrix, &labels, corpus.classes(), params)?;
            emit(Some(&output), forest.to_json().as_bytes())
        }
        Command::Predict {
            features,
            model,
            output,
        } => {
            let forest = load_model(&model)?;
            let (_, matrix) = features.load()?;
            let proba = forest.predict_matrix(&matrix)?;
            let csv = predictions_csv(&forest, matrix.doc_ids(), &proba);
            emit(output.as_deref(), csv.as_bytes())
        }
        Command::Explain {
            features,
            model,
            output,
            top_k,
        } => {
            let forest = load_model(&model)?;
            let (_, matrix) = features.load()?;
            let report =
                importance_report(&forest, &matrix, &features.input.display().to_string())?;
            if let Some(k) = top_k {
                eprint!("{}", report.top_k_table(k));
            }
            emit(output.as_deref(), report.to_csv().as_bytes())
        }
        Command::Evaluate {
            features,
            model,
            output,
        } => {
            let json = std::fs::read_to_string(&model).map_err(|e| Error::io(&model, e))?;
            let forest = Forest::from_json(&json)?;
            let (corpus, matrix) = features.load()?;
            let gold = labels_under(&corpus, &forest.classes)?;
            let pred: Vec<usize> = forest
                .predict_matrix(&matrix)?
                .iter()
                .map(|p| argmax(p))
                .collect();
            let metadata = ReportMetadata {
                seed: forest.params.seed,
                validation_fraction: 0.0,
                feature_set: FeatureSet {
                    agg: features.channels.is_some(),
                    ext: features.ext_columns.is_some(),
                }
                .to_string(),
                n_features: matrix.n_features(),
                model_hash: sha256_hex(json.as_bytes()),
                split: features.input.display().to_string(),
            };
            let report = EvalReport::from_indices(&gold, &pred, &forest.classes, metadata)?;
            eprint!("{}", report.to_text());
            let mut out = serde_json::to_string_pretty(&report).expect("report serializes");
            out.push('\n');
            emit(output.as_deref(), out.as_bytes())
        }
        Command::Run {
            config,
            output,
            trees,
            max_depth,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.eval.output_dir = dir;
            }
            if let Some(t) = trees {
                cfg.model.trees = t;
            }
            if let Some(d) = max_depth {
                cfg.model.max_depth = d;
            }
            if let Some(s) = seed {
                cfg.model.seed = s;
            }
            let outcome = run_experiment(&cfg)?;
            eprintln!(
                "validation macro F1 {:.4}{}; artifacts in {}",
                outcome.report.validation.macro_f1,
                outcome
                    .report
                    .test
                    .as_ref()
                    .map(|t| format!(", test macro F1 {:.4}", t.macro_f1))
                    .unwrap_or_default(),
                outcome.output_dir.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(3);
        }
    }
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(3),
    }
}
