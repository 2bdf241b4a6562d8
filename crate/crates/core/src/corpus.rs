//! Document collections: loading, validation and train/validation splitting.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    #[default]
    En,
    Es,
}

impl Lang {
    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Es => "es",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Lang::En),
            "es" => Ok(Lang::Es),
            other => Err(Error::InvalidArgument(format!(
                "unknown language {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub lang: Lang,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// An ordered, validated set of documents with its sorted class list.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    classes: Vec<String>,
}

impl Corpus {
    /// Validates ids and texts and derives the class list from the labels.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            check_document(doc, i + 1)?;
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: doc.id.clone(),
                    line: i + 1,
                });
            }
        }
        let classes = documents
            .iter()
            .filter_map(|d| d.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Corpus { documents, classes })
    }

    /// Keeps `classes` (which must cover every label) instead of deriving it.
    /// Splits use this so both halves share the parent's class indexing.
    pub fn with_classes(documents: Vec<Document>, classes: Vec<String>) -> Result<Self> {
        let mut corpus = Corpus::new(documents)?;
        let known: HashSet<&str> = classes.iter().map(String::as_str).collect();
        for label in &corpus.classes {
            if !known.contains(label.as_str()) {
                return Err(Error::UnknownLabel(label.clone()));
            }
        }
        let mut sorted = classes;
        sorted.sort();
        sorted.dedup();
        corpus.classes = sorted;
        Ok(corpus)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    /// True when every document carries a label.
    pub fn is_labeled(&self) -> bool {
        self.documents.iter().all(|d| d.label.is_some())
    }

    /// Class index of each document. Fails on unlabeled documents.
    pub fn label_indices(&self) -> Result<Vec<usize>> {
        self.documents
            .iter()
            .map(|d| {
                let label = d.label.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!("document {} has no label", d.id))
                })?;
                self.class_index(label)
                    .ok_or_else(|| Error::UnknownLabel(label.clone()))
            })
            .collect()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(label))
            .ok()
    }
}

fn check_document(doc: &Document, line: usize) -> Result<()> {
    if doc.id.is_empty() {
        return Err(Error::Malformed {
            line,
            message: "empty id".into(),
        });
    }
    if doc.text.trim().is_empty() {
        return Err(Error::Malformed {
            line,
            message: format!("document {} has empty text", doc.id),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guesses from the file extension; anything but `.tsv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format {other:?}"
            ))),
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Jsonl => parse_jsonl(&content),
        CorpusFormat::Tsv => parse_tsv(&content),
    }
}

pub fn parse_jsonl(content: &str) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        check_document(&doc, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                id: doc.id,
                line: line_no,
            });
        }
        documents.push(doc);
    }
    Corpus::new(documents)
}

pub fn parse_tsv(content: &str) -> Result<Corpus> {
    let mut lines = content.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) if !h.trim().is_empty() => h,
        _ => return Err(Error::EmptyCorpus),
    };
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| columns.iter().position(|c| *c == name);
    let (id_col, text_col) = match (find("id"), find("text")) {
        (Some(i), Some(t)) => (i, t),
        _ => {
            return Err(Error::Malformed {
                line: 1,
                message: "header must name id and text columns".into(),
            })
        }
    };
    let label_col = find("label");
    let lang_col = find("lang");

    let mut documents = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            return Err(Error::Malformed {
                line: line_no,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let lang = match lang_col.map(|c| fields[c]) {
            Some(s) if !s.is_empty() => s.parse().map_err(|e: Error| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?,
            _ => Lang::En,
        };
        let doc = Document {
            id: fields[id_col].to_string(),
            text: fields[text_col].to_string(),
            lang,
            label: label_col
                .map(|c| fields[c])
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        };
        check_document(&doc, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                id: doc.id,
                line: line_no,
            });
        }
        documents.push(doc);
    }
    Corpus::new(documents)
}

pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for doc in corpus.documents() {
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Uniform (unstratified) shuffle followed by a cut; the validation part gets
/// `round(fraction * n)` documents. Both parts keep the parent's class list
/// and their documents stay in original corpus order.
pub fn split_train_validation(
    corpus: &Corpus,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    if !corpus.is_labeled() {
        return Err(Error::InvalidArgument(
            "cannot split an unlabeled corpus".into(),
        ));
    }
    let n = corpus.len();
    let n_val = (validation_fraction * n as f64).round() as usize;
    if n_val == 0 || n_val == n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} documents at fraction {validation_fraction} leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let mut in_val = vec![false; n];
    for &i in &order[..n_val] {
        in_val[i] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (doc, &v) in corpus.documents.iter().zip(&in_val) {
        if v {
            val.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    let classes = corpus.classes.clone();
    Ok((
        Corpus::with_classes(train, classes.clone())?,
        Corpus::with_classes(val, classes)?,
    ))
}
