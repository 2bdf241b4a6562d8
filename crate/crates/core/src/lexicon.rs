//! Marker word lists used by the stylistic ratio features.
//!
//! A lexicon directory holds five plain-text files per language, one token
//! per line: `function_<lang>.txt`, `transitions_<lang>.txt`,
//! `hedges_<lang>.txt`, `first_person_<lang>.txt` and `formal_<lang>.txt`.
//! Entries are lowercased and deduplicated on load; blank lines and lines
//! starting with `#` are ignored.

use std::collections::HashSet;
use std::path::Path;

use crate::corpus::Lang;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerLexicon {
    pub function_words: HashSet<String>,
    pub transition_words: HashSet<String>,
    pub hedge_words: HashSet<String>,
    pub first_person_pronouns: HashSet<String>,
    pub formal_words: HashSet<String>,
}

const LIST_STEMS: [&str; 5] = [
    "function",
    "transitions",
    "hedges",
    "first_person",
    "formal",
];

fn builtin_source(stem: &str, lang: Lang) -> &'static str {
    match (stem, lang) {
        ("function", Lang::En) => include_str!("../lexicons/function_en.txt"),
        ("transitions", Lang::En) => include_str!("../lexicons/transitions_en.txt"),
        ("hedges", Lang::En) => include_str!("../lexicons/hedges_en.txt"),
        ("first_person", Lang::En) => include_str!("../lexicons/first_person_en.txt"),
        ("formal", Lang::En) => include_str!("../lexicons/formal_en.txt"),
        ("function", Lang::Es) => include_str!("../lexicons/function_es.txt"),
        ("transitions", Lang::Es) => include_str!("../lexicons/transitions_es.txt"),
        ("hedges", Lang::Es) => include_str!("../lexicons/hedges_es.txt"),
        ("first_person", Lang::Es) => include_str!("../lexicons/first_person_es.txt"),
        ("formal", Lang::Es) => include_str!("../lexicons/formal_es.txt"),
        _ => unreachable!("unknown lexicon list {stem}"),
    }
}

fn parse_list(source: &str) -> HashSet<String> {
    source
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl MarkerLexicon {
    fn from_lists(mut lists: Vec<HashSet<String>>) -> Self {
        let formal_words = lists.pop().unwrap();
        let first_person_pronouns = lists.pop().unwrap();
        let hedge_words = lists.pop().unwrap();
        let transition_words = lists.pop().unwrap();
        let function_words = lists.pop().unwrap();
        MarkerLexicon {
            function_words,
            transition_words,
            hedge_words,
            first_person_pronouns,
            formal_words,
        }
    }

    /// The word lists shipped with the crate.
    pub fn builtin(lang: Lang) -> Self {
        let lists = LIST_STEMS
            .iter()
            .map(|stem| parse_list(builtin_source(stem, lang)))
            .collect();
        Self::from_lists(lists)
    }
}

pub fn lexicon_file_name(stem: &str, lang: Lang) -> String {
    format!("{stem}_{}.txt", lang.code())
}

pub fn load_lexicon(dir: impl AsRef<Path>, lang: Lang) -> Result<MarkerLexicon> {
    let dir = dir.as_ref();
    let mut lists = Vec::with_capacity(LIST_STEMS.len());
    for stem in LIST_STEMS {
        let path = dir.join(lexicon_file_name(stem, lang));
        let source = match std::fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingLexicon(path))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let set = parse_list(&source);
        if set.is_empty() {
            return Err(Error::EmptyLexicon(path));
        }
        lists.push(set);
    }
    Ok(MarkerLexicon::from_lists(lists))
}

/// Lexicons for both supported languages.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub en: MarkerLexicon,
    pub es: MarkerLexicon,
}

impl Lexicons {
    pub fn builtin() -> Self {
        Lexicons {
            en: MarkerLexicon::builtin(Lang::En),
            es: MarkerLexicon::builtin(Lang::Es),
        }
    }

    /// Loads languages present in `dir`, falling back to the built-in lists
    /// for a language whose files are all absent.
    pub fn load_or_builtin(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let load = |lang| {
            let any_present = LIST_STEMS
                .iter()
                .any(|s| dir.join(lexicon_file_name(s, lang)).exists());
            if any_present {
                load_lexicon(dir, lang)
            } else {
                Ok(MarkerLexicon::builtin(lang))
            }
        };
        Ok(Lexicons {
            en: load(Lang::En)?,
            es: load(Lang::Es)?,
        })
    }

    pub fn get(&self, lang: Lang) -> &MarkerLexicon {
        match lang {
            Lang::En => &self.en,
            Lang::Es => &self.es,
        }
    }
}
