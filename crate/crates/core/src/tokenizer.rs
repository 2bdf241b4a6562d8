//! Word tokenization and terminal-punctuation sentence segmentation.
//!
//! A word is a maximal run of letters and digits (combining marks allowed
//! after the first character), optionally joined by internal apostrophes or
//! hyphens: `don't`, `state-of-the-art`. Tokens are lowercased.
//!
//! A sentence ends at `.`, `!`, `?` or `…` when the next character is
//! whitespace or the end of the text. There is no abbreviation list, so
//! `Dr. Smith` splits after `Dr.`. Sentences without tokens are dropped; a
//! text with no tokens at all gets a single empty sentence.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::Lang;

static WORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\p{L}\p{N}][\p{L}\p{M}\p{N}]*(?:['’\-][\p{L}\p{N}][\p{L}\p{M}\p{N}]*)*")
        .expect("word pattern compiles")
});

static PUNCT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\p{P}").expect("punctuation pattern compiles"));

/// Character counts by punctuation class. `total` counts every Unicode
/// punctuation character (general category P). Only closing `!` and `?`
/// are counted, so Spanish `¿…?` counts as one question mark.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PunctCounts {
    pub comma: usize,
    pub exclamation: usize,
    pub question: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedText {
    pub tokens: Vec<String>,
    pub sentences: Vec<Range<usize>>,
    pub char_count: usize,
    pub punct: PunctCounts,
}

impl TokenizedText {
    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    /// Number of non-empty sentences (0 for a text without tokens).
    pub fn sentence_count(&self) -> usize {
        self.sentences.iter().filter(|r| !r.is_empty()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn sentence_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.sentences.iter().map(|r| r.len()).filter(|&l| l > 0)
    }
}

pub fn is_sentence_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

pub fn tokenize(text: &str) -> TokenizedText {
    let mut tokens = Vec::new();
    let mut starts = Vec::new();
    for m in WORD.find_iter(text) {
        tokens.push(m.as_str().to_lowercase());
        starts.push(m.start());
    }

    let mut sentences = Vec::new();
    let mut open = 0;
    let mut consumed = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((pos, c)) = chars.next() {
        if !is_sentence_terminal(c) {
            continue;
        }
        let at_boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
        if !at_boundary {
            continue;
        }
        while consumed < starts.len() && starts[consumed] < pos {
            consumed += 1;
        }
        if consumed > open {
            sentences.push(open..consumed);
            open = consumed;
        }
    }
    if open < tokens.len() {
        sentences.push(open..tokens.len());
    }
    if tokens.is_empty() {
        sentences.push(0..0);
    }

    let mut punct = PunctCounts {
        total: PUNCT.find_iter(text).count(),
        ..PunctCounts::default()
    };
    for c in text.chars() {
        match c {
            ',' => punct.comma += 1,
            '!' => punct.exclamation += 1,
            '?' => punct.question += 1,
            _ => {}
        }
    }

    TokenizedText {
        tokens,
        sentences,
        char_count: text.chars().count(),
        punct,
    }
}

fn is_vowel(c: char, lang: Lang) -> bool {
    match lang {
        Lang::En => matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'),
        Lang::Es => matches!(
            c,
            'a' | 'e' | 'i' | 'o' | 'u' | 'á' | 'é' | 'í' | 'ó' | 'ú' | 'ü'
        ),
    }
}

/// Vowel-group syllable estimate, at least 1. English drops a word-final
/// silent `e` when the word has more than one group.
pub fn syllable_count(token: &str, lang: Lang) -> usize {
    let mut groups = 0;
    let mut prev_vowel = false;
    for c in token.chars().flat_map(char::to_lowercase) {
        let v = is_vowel(c, lang);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    if lang == Lang::En && groups > 1 && token.to_lowercase().ends_with('e') {
        groups -= 1;
    }
    groups.max(1)
}
