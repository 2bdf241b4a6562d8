//! The 26 document-level stylometric features.
//!
//! Counts come from a [`TokenizedText`]: `N` tokens, `V` distinct tokens and
//! `S` non-empty sentences. Frequency-based features are normalized by `N`
//! or `S`; standard deviations are population deviations. A text without
//! tokens maps to the all-zero vector.

use std::collections::{HashMap, HashSet};

use crate::corpus::Lang;
use crate::lexicon::MarkerLexicon;
use crate::stats::mean_std;
use crate::tokenizer::{syllable_count, TokenizedText};

pub const STYLO_FEATURE_COUNT: usize = 26;

pub const STYLO_FEATURE_NAMES: [&str; STYLO_FEATURE_COUNT] = [
    "ttr",
    "root_ttr",
    "log_ttr",
    "hapax_ratio",
    "dis_legomena_ratio",
    "rare_word_burstiness",
    "avg_sentence_length",
    "sentence_length_std",
    "sentence_length_cv",
    "sentence_count",
    "bigram_repetition",
    "trigram_repetition",
    "avg_word_length",
    "word_length_std",
    "word_count",
    "function_word_ratio",
    "transition_word_ratio",
    "hedge_word_ratio",
    "first_person_ratio",
    "formal_word_ratio",
    "flesch_reading_ease",
    "flesch_kincaid_grade",
    "punctuation_ratio",
    "comma_ratio",
    "exclamation_ratio",
    "question_ratio",
];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StyloFeatures {
    pub ttr: f64,
    pub root_ttr: f64,
    pub log_ttr: f64,
    pub hapax_ratio: f64,
    pub dis_legomena_ratio: f64,
    pub rare_word_burstiness: f64,
    pub avg_sentence_length: f64,
    pub sentence_length_std: f64,
    pub sentence_length_cv: f64,
    pub sentence_count: f64,
    pub bigram_repetition: f64,
    pub trigram_repetition: f64,
    pub avg_word_length: f64,
    pub word_length_std: f64,
    pub word_count: f64,
    pub function_word_ratio: f64,
    pub transition_word_ratio: f64,
    pub hedge_word_ratio: f64,
    pub first_person_ratio: f64,
    pub formal_word_ratio: f64,
    pub flesch_reading_ease: f64,
    pub flesch_kincaid_grade: f64,
    pub punctuation_ratio: f64,
    pub comma_ratio: f64,
    pub exclamation_ratio: f64,
    pub question_ratio: f64,
}

impl StyloFeatures {
    /// Values in [`STYLO_FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; STYLO_FEATURE_COUNT] {
        [
            self.ttr,
            self.root_ttr,
            self.log_ttr,
            self.hapax_ratio,
            self.dis_legomena_ratio,
            self.rare_word_burstiness,
            self.avg_sentence_length,
            self.sentence_length_std,
            self.sentence_length_cv,
            self.sentence_count,
            self.bigram_repetition,
            self.trigram_repetition,
            self.avg_word_length,
            self.word_length_std,
            self.word_count,
            self.function_word_ratio,
            self.transition_word_ratio,
            self.hedge_word_ratio,
            self.first_person_ratio,
            self.formal_word_ratio,
            self.flesch_reading_ease,
            self.flesch_kincaid_grade,
            self.punctuation_ratio,
            self.comma_ratio,
            self.exclamation_ratio,
            self.question_ratio,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> {
        STYLO_FEATURE_NAMES.into_iter().zip(self.to_array())
    }
}

/// Goh-Barabasi burstiness `(sigma - mu) / (sigma + mu)` of the gaps between
/// successive occurrences of rare tokens (corpus frequency at most 2).
/// Fewer than three rare occurrences gives 0.
fn rare_word_burstiness(tokens: &[String], freq: &HashMap<&str, usize>) -> f64 {
    let positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| freq[t.as_str()] <= 2)
        .map(|(i, _)| i)
        .collect();
    if positions.len() < 3 {
        return 0.0;
    }
    let gaps: Vec<f64> = positions.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let (mu, sigma) = mean_std(&gaps);
    (sigma - mu) / (sigma + mu)
}

/// Share of n-grams that repeat an earlier one: `(total - unique) / total`.
fn ngram_repetition(tokens: &[String], n: usize) -> f64 {
    if tokens.len() < n {
        return 0.0;
    }
    let total = tokens.len() + 1 - n;
    let unique: HashSet<&[String]> = tokens.windows(n).collect();
    (total - unique.len()) as f64 / total as f64
}

fn marker_ratio(tokens: &[String], set: &HashSet<String>) -> f64 {
    tokens.iter().filter(|t| set.contains(t.as_str())).count() as f64 / tokens.len() as f64
}

pub fn extract_stylo(tok: &TokenizedText, lex: &MarkerLexicon, lang: Lang) -> StyloFeatures {
    let tokens = &tok.tokens;
    if tokens.is_empty() {
        log::debug!("text without tokens; using the all-zero stylometric vector");
        return StyloFeatures::default();
    }
    let n = tokens.len() as f64;

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *freq.entry(t.as_str()).or_default() += 1;
    }
    let v = freq.len() as f64;
    let hapax = freq.values().filter(|&&c| c == 1).count() as f64;
    // share of tokens belonging to twice-seen words
    let dis = 2.0 * freq.values().filter(|&&c| c == 2).count() as f64;

    let sentence_lengths: Vec<f64> = tok.sentence_lengths().map(|l| l as f64).collect();
    let s = sentence_lengths.len() as f64;
    let (sent_mean, sent_std) = mean_std(&sentence_lengths);

    let word_lengths: Vec<f64> = tokens.iter().map(|t| t.chars().count() as f64).collect();
    let (word_mean, word_std) = mean_std(&word_lengths);

    let syllables: usize = tokens.iter().map(|t| syllable_count(t, lang)).sum();
    let words_per_sentence = n / s;
    let syllables_per_word = syllables as f64 / n;

    StyloFeatures {
        ttr: v / n,
        root_ttr: v / n.sqrt(),
        log_ttr: if tokens.len() == 1 {
            1.0
        } else {
            v.ln() / n.ln()
        },
        hapax_ratio: hapax / n,
        dis_legomena_ratio: dis / n,
        rare_word_burstiness: rare_word_burstiness(tokens, &freq),
        avg_sentence_length: words_per_sentence,
        sentence_length_std: sent_std,
        sentence_length_cv: if sent_mean > 0.0 {
            sent_std / sent_mean
        } else {
            0.0
        },
        sentence_count: s,
        bigram_repetition: ngram_repetition(tokens, 2),
        trigram_repetition: ngram_repetition(tokens, 3),
        avg_word_length: word_mean,
        word_length_std: word_std,
        word_count: n,
        function_word_ratio: marker_ratio(tokens, &lex.function_words),
        transition_word_ratio: marker_ratio(tokens, &lex.transition_words),
        hedge_word_ratio: marker_ratio(tokens, &lex.hedge_words),
        first_person_ratio: marker_ratio(tokens, &lex.first_person_pronouns),
        formal_word_ratio: marker_ratio(tokens, &lex.formal_words),
        flesch_reading_ease: 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word,
        flesch_kincaid_grade: 0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59,
        punctuation_ratio: tok.punct.total as f64 / tok.char_count as f64,
        comma_ratio: tok.punct.comma as f64 / s,
        exclamation_ratio: tok.punct.exclamation as f64 / s,
        question_ratio: tok.punct.question as f64 / s,
    }
}
