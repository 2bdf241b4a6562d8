//! Independent reference implementations and data generators shared by the
//! integration tests and the acceptance suite. Nothing here calls the code
//! under test except to read plain data (lexicon sets, tree nodes).

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use attrib::channels::ChannelSequence;
use attrib::corpus::{Document, Lang};
use attrib::forest::TreeNode;
use attrib::lexicon::MarkerLexicon;

/// splitmix64; test data only.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + self.below(hi_inclusive - lo + 1)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

// ---------------------------------------------------------------------------
// Stylometry reference

const COMBINING_ACUTE: char = '\u{301}';

fn starts_word(c: char) -> bool {
    c.is_alphanumeric()
}

fn continues_word(c: char) -> bool {
    c.is_alphanumeric() || c == COMBINING_ACUTE
}

fn is_joiner(c: char) -> bool {
    c == '\'' || c == '’' || c == '-'
}

fn is_terminal(c: char) -> bool {
    c == '.' || c == '!' || c == '?' || c == '…'
}

/// Punctuation characters the text generator can emit.
fn is_punct(c: char) -> bool {
    ".,;:!?¡¿'’\"-…()".contains(c)
}

/// Character-scanning tokenizer. Returns lowercased tokens with the char
/// index each starts at, plus per-sentence token counts (empty sentences
/// dropped).
pub fn ref_tokenize(text: &str) -> (Vec<String>, Vec<usize>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut starts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !starts_word(chars[i]) {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        loop {
            while i < chars.len() && continues_word(chars[i]) {
                i += 1;
            }
            if i + 1 < chars.len() && is_joiner(chars[i]) && starts_word(chars[i + 1]) {
                i += 2;
            } else {
                break;
            }
        }
        let word: String = chars[start..i]
            .iter()
            .flat_map(|c| c.to_lowercase())
            .collect();
        tokens.push(word);
        starts.push(start);
    }

    let mut boundaries = Vec::new();
    for (j, &c) in chars.iter().enumerate() {
        if is_terminal(c) && (j + 1 == chars.len() || chars[j + 1].is_whitespace()) {
            boundaries.push(j);
        }
    }
    let mut lengths = Vec::new();
    let mut lo = 0;
    for &b in boundaries.iter().chain(std::iter::once(&usize::MAX)) {
        let n = starts.iter().filter(|&&s| s >= lo && s < b).count();
        if n > 0 {
            lengths.push(n);
        }
        lo = b;
    }
    (tokens, lengths)
}

fn pop_mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn ref_syllables(token: &str, lang: Lang) -> usize {
    let vowels: &[char] = match lang {
        Lang::En => &['a', 'e', 'i', 'o', 'u', 'y'],
        Lang::Es => &['a', 'e', 'i', 'o', 'u', 'á', 'é', 'í', 'ó', 'ú', 'ü'],
    };
    let chars: Vec<char> = token.chars().collect();
    let mut groups = (0..chars.len())
        .filter(|&i| vowels.contains(&chars[i]) && (i == 0 || !vowels.contains(&chars[i - 1])))
        .count();
    if lang == Lang::En && groups > 1 && chars.last() == Some(&'e') {
        groups -= 1;
    }
    groups.max(1)
}

fn repetition(tokens: &[String], n: usize) -> f64 {
    if tokens.len() < n {
        return 0.0;
    }
    let total = tokens.len() - n + 1;
    let distinct: BTreeSet<Vec<&String>> = (0..total)
        .map(|i| tokens[i..i + n].iter().collect())
        .collect();
    (total - distinct.len()) as f64 / total as f64
}

/// The 26 stylometric values, in column order.
pub fn ref_stylo(text: &str, lex: &MarkerLexicon, lang: Lang) -> [f64; 26] {
    let (tokens, sentence_lengths) = ref_tokenize(text);
    if tokens.is_empty() {
        return [0.0; 26];
    }
    let n = tokens.len() as f64;
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &tokens {
        *freq.entry(t).or_insert(0) += 1;
    }
    let v = freq.len() as f64;
    let once = freq.values().filter(|&&c| c == 1).count() as f64;
    let twice_tokens = freq
        .values()
        .filter(|&&c| c == 2)
        .map(|&c| c as f64)
        .sum::<f64>();

    let rare_pos: Vec<usize> = (0..tokens.len())
        .filter(|&i| freq[tokens[i].as_str()] <= 2)
        .collect();
    let burst = if rare_pos.len() < 3 {
        0.0
    } else {
        let gaps: Vec<f64> = rare_pos.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let (mu, sigma) = pop_mean_std(&gaps);
        (sigma - mu) / (sigma + mu)
    };

    let s = sentence_lengths.len() as f64;
    let sl: Vec<f64> = sentence_lengths.iter().map(|&l| l as f64).collect();
    let (sl_mean, sl_std) = pop_mean_std(&sl);
    let wl: Vec<f64> = tokens.iter().map(|t| t.chars().count() as f64).collect();
    let (wl_mean, wl_std) = pop_mean_std(&wl);
    let ratio = |set: &std::collections::HashSet<String>| {
        tokens.iter().filter(|t| set.contains(*t)).count() as f64 / n
    };
    let syll: usize = tokens.iter().map(|t| ref_syllables(t, lang)).sum();
    let asl = n / s;
    let spw = syll as f64 / n;
    let chars: Vec<char> = text.chars().collect();
    let count = |c: char| chars.iter().filter(|&&x| x == c).count() as f64;

    [
        v / n,
        v / n.sqrt(),
        if tokens.len() == 1 {
            1.0
        } else {
            v.ln() / n.ln()
        },
        once / n,
        twice_tokens / n,
        burst,
        asl,
        sl_std,
        if sl_mean > 0.0 { sl_std / sl_mean } else { 0.0 },
        s,
        repetition(&tokens, 2),
        repetition(&tokens, 3),
        wl_mean,
        wl_std,
        n,
        ratio(&lex.function_words),
        ratio(&lex.transition_words),
        ratio(&lex.hedge_words),
        ratio(&lex.first_person_pronouns),
        ratio(&lex.formal_words),
        206.835 - 1.015 * asl - 84.6 * spw,
        0.39 * asl + 11.8 * spw - 15.59,
        chars.iter().filter(|&&c| is_punct(c)).count() as f64 / chars.len() as f64,
        count(',') / s,
        count('!') / s,
        count('?') / s,
    ]
}

/// Random text over a small alphabet whose Unicode classes are known: ASCII
/// and accented letters, digits, a combining accent, joiners, punctuation,
/// symbols and assorted whitespace. Words are mixed with lexicon entries so
/// marker ratios are exercised.
pub fn random_text(rng: &mut TestRng, lex: &MarkerLexicon) -> String {
    const LETTERS: &[char] = &[
        'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'l', 'm', 'n', 'o', 'p', 'r', 's', 't', 'u',
        'y', 'z', 'A', 'E', 'T', 'Y', 'é', 'ñ', 'á', 'ü', 'Ñ', 'ó', '1', '2', '7',
    ];
    const SEPARATORS: &[&str] = &[
        " ", " ", " ", " ", "  ", "\n", "\t", ", ", ". ", "! ", "? ", "... ", "… ", "; ", ": ",
        " - ", " ' ", " \"", "\" ", " (", ") ", " ¿", " ¡", "?", ".", "!", "-", "'", " + ", " $",
        " 3.5 ", "e.g. ", ".\n",
    ];
    let mut markers: Vec<&String> = lex
        .function_words
        .iter()
        .chain(&lex.transition_words)
        .chain(&lex.hedge_words)
        .chain(&lex.first_person_pronouns)
        .chain(&lex.formal_words)
        .collect();
    markers.sort();

    let n_words = match rng.below(10) {
        0 => 0,
        1 => rng.range(1, 3),
        _ => rng.range(4, 80),
    };
    let mut out = String::new();
    if rng.chance(0.1) {
        out.push_str(rng.pick(SEPARATORS));
    }
    let mut previous: Vec<String> = Vec::new();
    for _ in 0..n_words {
        let word = if previous.len() >= 4 && rng.chance(0.06) {
            let start = rng.below(previous.len() - 3);
            previous[start..start + 3].join(" ")
        } else if !previous.is_empty() && rng.chance(0.15) {
            rng.pick(&previous).clone()
        } else if rng.chance(0.3) {
            let w = rng.pick(&markers).to_string();
            if rng.chance(0.2) {
                let mut cs = w.chars();
                cs.next()
                    .map(|c| c.to_uppercase().chain(cs).collect())
                    .unwrap_or(w)
            } else {
                w
            }
        } else {
            let len = rng.range(1, 9);
            let mut w: String = (0..len).map(|_| *rng.pick(LETTERS)).collect();
            if rng.chance(0.05) {
                w.push(COMBINING_ACUTE);
            }
            if rng.chance(0.08) {
                w.push(*rng.pick(&['\'', '’', '-']));
                let tail = rng.range(1, 4);
                w.extend((0..tail).map(|_| *rng.pick(LETTERS)));
            }
            w
        };
        previous.push(word.clone());
        out.push_str(&word);
        out.push_str(rng.pick(SEPARATORS));
    }
    if rng.chance(0.1) {
        out.push_str(rng.pick(&["", "!!", "?", "…", "..."]));
    }
    out
}

// ---------------------------------------------------------------------------
// Channel aggregation reference

pub fn random_sequence(rng: &mut TestRng, doc_id: &str, k: usize) -> ChannelSequence {
    let len = rng.range(1, 128);
    let mut mask: Vec<bool> = (0..len).map(|_| rng.chance(0.8)).collect();
    let forced = rng.below(len);
    mask[forced] = true;
    let values = mask
        .iter()
        .map(|&m| {
            (0..k)
                .map(|_| {
                    if !m && rng.chance(0.5) {
                        None
                    } else {
                        Some((rng.unit() - 0.5) * 20.0)
                    }
                })
                .collect()
        })
        .collect();
    ChannelSequence {
        doc_id: doc_id.to_string(),
        channel_names: (0..k).map(|i| format!("ch{i}")).collect(),
        values,
        mask,
    }
}

/// `[mean, max, min, std]` per channel, concatenated.
pub fn ref_aggregate(seq: &ChannelSequence) -> Vec<f64> {
    let k = seq.channel_names.len();
    let mut out = Vec::with_capacity(4 * k);
    for c in 0..k {
        let xs: Vec<f64> = seq
            .values
            .iter()
            .zip(&seq.mask)
            .filter(|(_, &m)| m)
            .map(|(row, _)| row[c].expect("masked positions hold values"))
            .collect();
        let (mean, std) = pop_mean_std(&xs);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        out.extend([mean, max, min, std]);
    }
    out
}

// ---------------------------------------------------------------------------
// Gini reference

#[derive(Debug, Clone, Copy)]
pub struct RefSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn gini(labels: &[usize], n_classes: usize) -> f64 {
    let n = labels.len() as f64;
    let mut counts = vec![0.0; n_classes];
    for &l in labels {
        counts[l] += 1.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

/// Every (feature, midpoint) candidate with its weighted Gini decrease, in
/// feature then threshold order.
pub fn all_splits(rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Vec<RefSplit> {
    let n = rows.len() as f64;
    let parent = gini(labels, n_classes);
    let d = rows[0].len();
    let mut out = Vec::new();
    for f in 0..d {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = w[0] / 2.0 + w[1] / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .zip(labels)
                .map(|(row, &y)| (row[f] <= t, y))
                .fold((vec![], vec![]), |(mut l, mut r), (left, y)| {
                    if left {
                        l.push(y)
                    } else {
                        r.push(y)
                    }
                    (l, r)
                });
            let child =
                l.len() as f64 / n * gini(&l, n_classes) + r.len() as f64 / n * gini(&r, n_classes);
            out.push(RefSplit {
                feature: f,
                threshold: t,
                gain: parent - child,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Shapley reference

fn proba(counts: &[u32]) -> Vec<f64> {
    let total: u32 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

fn cover(node: &TreeNode) -> f64 {
    match node {
        TreeNode::Leaf { counts } => counts.iter().map(|&c| c as f64).sum(),
        TreeNode::Split { left, right, .. } => cover(left) + cover(right),
    }
}

/// Expected leaf distribution when only features in `known` are fixed to
/// `row`; unknown splits are averaged by cover.
pub fn conditional_value(node: &TreeNode, row: &[f64], known: u32) -> Vec<f64> {
    match node {
        TreeNode::Leaf { counts } => proba(counts),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if known & (1 << feature) != 0 {
                let child = if row[*feature] <= *threshold {
                    left
                } else {
                    right
                };
                conditional_value(child, row, known)
            } else {
                let (cl, cr) = (cover(left), cover(right));
                let vl = conditional_value(left, row, known);
                let vr = conditional_value(right, row, known);
                vl.iter()
                    .zip(&vr)
                    .map(|(a, b)| (cl * a + cr * b) / (cl + cr))
                    .collect()
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exact Shapley values `phi[class][feature]` by enumerating all 2^d
/// coalitions.
pub fn brute_force_shap(node: &TreeNode, row: &[f64], n_classes: usize) -> Vec<Vec<f64>> {
    let d = row.len();
    assert!(d <= 16);
    let values: Vec<Vec<f64>> = (0..1u32 << d)
        .map(|s| conditional_value(node, row, s))
        .collect();
    let mut phi = vec![vec![0.0; d]; n_classes];
    for i in 0..d {
        for s in 0..1u32 << d {
            if s & (1 << i) != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = factorial(size) * factorial(d - size - 1) / factorial(d);
            let with = &values[(s | (1 << i)) as usize];
            let without = &values[s as usize];
            for c in 0..n_classes {
                phi[c][i] += w * (with[c] - without[c]);
            }
        }
    }
    phi
}

/// Random tree with at most `max_depth` levels of splits over `d` features.
pub fn random_tree(rng: &mut TestRng, d: usize, max_depth: usize, n_classes: usize) -> TreeNode {
    if max_depth == 0 || rng.chance(0.2) {
        let mut counts: Vec<u32> = (0..n_classes).map(|_| rng.range(0, 20) as u32).collect();
        counts[rng.below(n_classes)] += 1;
        return TreeNode::Leaf { counts };
    }
    TreeNode::Split {
        feature: rng.below(d),
        threshold: (rng.unit() - 0.5) * 2.0,
        left: Box::new(random_tree(rng, d, max_depth - 1, n_classes)),
        right: Box::new(random_tree(rng, d, max_depth - 1, n_classes)),
    }
}

// ---------------------------------------------------------------------------
// Synthetic attribution corpus

/// Filler vocabulary of made-up words that avoids every lexicon entry.
pub fn filler_vocabulary(rng: &mut TestRng, size: usize, lex: &MarkerLexicon) -> Vec<String> {
    const ONSETS: &[&str] = &[
        "b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st",
        "pl", "tr",
    ];
    const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ea"];
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let syllables = rng.range(1, 4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(rng.pick(ONSETS));
            w.push_str(rng.pick(NUCLEI));
        }
        if rng.chance(0.4) {
            w.push_str(rng.pick(&["n", "s", "t", "r", "l"]));
        }
        let taken = lex.function_words.contains(&w)
            || lex.transition_words.contains(&w)
            || lex.hedge_words.contains(&w)
            || lex.first_person_pronouns.contains(&w)
            || lex.formal_words.contains(&w);
        if !taken && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Class profile: long sentences, hedging, phrase repetition.
pub const CLASS_FACTORS: [(&str, bool, bool, bool); 4] = [
    ("a", false, false, false),
    ("b", true, true, false),
    ("c", true, false, true),
    ("d", false, true, true),
];

pub const PLANTED_FEATURES: [&str; 3] = [
    "avg_sentence_length",
    "hedge_word_ratio",
    "bigram_repetition",
];

/// Balanced synthetic corpus whose classes differ by construction in
/// sentence length, hedge-word rate and bigram repetition.
pub fn synthetic_corpus(n_docs: usize, seed: u64, lex: &MarkerLexicon) -> Vec<Document> {
    let mut rng = TestRng::new(seed);
    let vocab = filler_vocabulary(&mut rng, 4000, lex);
    let hedges: Vec<String> = {
        let mut h: Vec<String> = lex
            .hedge_words
            .iter()
            .filter(|w| {
                !lex.function_words.contains(*w)
                    && !lex.transition_words.contains(*w)
                    && !lex.formal_words.contains(*w)
            })
            .cloned()
            .collect();
        h.sort();
        h
    };
    (0..n_docs)
        .map(|i| {
            let (label, long, hedged, repetitive) = CLASS_FACTORS[i % 4];
            let n_words = rng.range(60, 200);
            let mut words: Vec<String> = Vec::with_capacity(n_words + 8);
            while words.len() < n_words {
                if repetitive && words.len() >= 6 && rng.chance(0.12) {
                    let span = rng.range(3, 5);
                    let start = rng.below(words.len() - span);
                    let copy: Vec<String> = words[start..start + span].to_vec();
                    words.extend(copy);
                } else if hedged && rng.chance(0.08) {
                    words.push(rng.pick(&hedges).clone());
                } else {
                    words.push(rng.pick(&vocab).clone());
                }
            }
            let mut text = String::new();
            let mut k = 0;
            while k < words.len() {
                let len = if long {
                    rng.range(16, 24)
                } else {
                    rng.range(5, 11)
                };
                let end = (k + len).min(words.len());
                let sentence = &words[k..end];
                for (j, w) in sentence.iter().enumerate() {
                    if j == 0 {
                        let mut cs = w.chars();
                        let first = cs.next().expect("non-empty word");
                        text.extend(first.to_uppercase());
                        text.push_str(cs.as_str());
                    } else {
                        text.push(' ');
                        text.push_str(w);
                    }
                    if j + 1 < sentence.len() && rng.chance(0.06) {
                        text.push(',');
                    }
                }
                text.push_str(". ");
                k = end;
            }
            Document {
                id: format!("doc{i:05}"),
                text: text.trim_end().to_string(),
                lang: Lang::En,
                label: Some(label.to_string()),
            }
        })
        .collect()
}
