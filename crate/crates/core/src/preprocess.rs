//! Lyric text filtering.
//!
//! The pipeline runs, per corpus: multiword concatenation, corpus-level case
//! normalization, accent and punctuation stripping, whitespace tokenization
//! and stop-word removal.
//!
//! Case normalization separates verse-initial capitals from proper nouns. For
//! every word form, `n` counts lowercase-initial occurrences and `N`
//! uppercase-initial ones; the form is lowercased everywhere when
//! `N < gamma * (n + N)`. Word forms are compared after lowercasing and
//! accent folding, so transcription variants such as `Cádiz` and `Cadiz` share
//! one tally.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus_io::{Corpus, LyricRecord};
use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.2;

pub const DEFAULT_PUNCTUATION: [char; 12] = [',', ';', '.', ':', '¡', '!', '¿', '?', '@', '#', '\\', '$'];

const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords_es.txt");
const DEFAULT_CONCAT_MAP: &str = include_str!("../resources/concat_map.tsv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub gamma: f64,
    pub concat_map: Vec<(String, String)>,
    pub stopwords: BTreeSet<String>,
    pub punctuation: BTreeSet<char>,
}

impl Default for PreprocessConfig {
    /// Shipped stop words and concatenation map, `gamma = 0.2`.
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            concat_map: parse_concat_map(DEFAULT_CONCAT_MAP).expect("bundled concat map is valid"),
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            punctuation: DEFAULT_PUNCTUATION.into_iter().collect(),
        }
    }
}

impl PreprocessConfig {
    /// Default punctuation only: no stop words, no concatenations.
    pub fn bare(gamma: f64) -> Self {
        Self {
            gamma,
            concat_map: Vec::new(),
            stopwords: BTreeSet::new(),
            punctuation: DEFAULT_PUNCTUATION.into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        for (phrase, _) in &self.concat_map {
            if phrase.split_whitespace().count() < 2 {
                return Err(Error::InvalidConfig(format!("concat phrase {phrase:?} is not multiword")));
            }
        }
        for w in &self.stopwords {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::InvalidConfig(format!("stop word {w:?} contains whitespace")));
            }
            if *w != w.to_lowercase() {
                return Err(Error::InvalidConfig(format!("stop word {w:?} is not lowercase")));
            }
        }
        Ok(())
    }
}

/// One word per line; blank lines and `#` comments are skipped.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// `phrase<TAB>joined` lines; blank lines and `#` comments are skipped.
pub fn parse_concat_map(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (phrase, joined) = line.split_once('\t').ok_or_else(|| Error::Format {
            line: i + 1,
            message: "expected phrase<TAB>joined".into(),
        })?;
        out.push((phrase.trim().to_string(), joined.trim().to_string()));
    }
    Ok(out)
}

/// Compiled form of a concatenation map.
///
/// A phrase matches a run of whole words, compared case-insensitively, whose
/// separators are non-empty runs of whitespace other than newlines. At each
/// word the longest matching phrase wins.
#[derive(Debug, Clone)]
pub struct ConcatMatcher {
    /// Lowercased phrase words and the joined form, longest phrase first.
    phrases: Vec<(Vec<String>, String)>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || is_combining_mark(c)
}

/// Byte spans of maximal word-character runs.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

impl ConcatMatcher {
    pub fn new(map: &[(String, String)]) -> Self {
        let mut phrases: Vec<(Vec<String>, String)> = map
            .iter()
            .map(|(phrase, joined)| (phrase.split_whitespace().map(str::to_lowercase).collect(), joined.clone()))
            .collect();
        phrases.sort_by_key(|(words, _)| std::cmp::Reverse(words.iter().map(|w| w.chars().count() + 1).sum::<usize>()));
        Self { phrases }
    }

    fn match_at(&self, text: &str, spans: &[(usize, usize)], lowered: &[String], at: usize) -> Option<(usize, &str)> {
        'phrases: for (words, joined) in &self.phrases {
            if at + words.len() > spans.len() {
                continue;
            }
            for (k, word) in words.iter().enumerate() {
                if lowered[at + k] != *word {
                    continue 'phrases;
                }
                if k > 0 {
                    let gap = &text[spans[at + k - 1].1..spans[at + k].0];
                    if !gap.chars().all(|c| c.is_whitespace() && c != '\n') {
                        continue 'phrases;
                    }
                }
            }
            return Some((words.len(), joined));
        }
        None
    }

    pub fn apply(&self, text: &str) -> String {
        if self.phrases.is_empty() {
            return text.to_string();
        }
        let spans = word_spans(text);
        let lowered: Vec<String> = spans.iter().map(|&(s, e)| text[s..e].to_lowercase()).collect();
        let mut out = String::with_capacity(text.len());
        let mut copied = 0;
        let mut i = 0;
        while i < spans.len() {
            if let Some((n, joined)) = self.match_at(text, &spans, &lowered, i) {
                out.push_str(&text[copied..spans[i].0]);
                out.push_str(joined);
                copied = spans[i + n - 1].1;
                i += n;
            } else {
                i += 1;
            }
        }
        out.push_str(&text[copied..]);
        out
    }
}

pub fn apply_concat_map(text: &str, config: &PreprocessConfig) -> String {
    ConcatMatcher::new(&config.concat_map).apply(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDecision {
    pub word: String,
    pub n_lower: usize,
    pub n_upper: usize,
    pub lowered: bool,
}

fn gamma_rule(n_lower: usize, n_upper: usize, gamma: f64) -> bool {
    (n_upper as f64) < gamma * (n_lower + n_upper) as f64
}

/// Word forms to lowercase, frozen from a corpus so the same decisions can be
/// applied to unseen text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseModel {
    pub lowered: BTreeSet<String>,
}

impl CaseModel {
    pub fn lowers(&self, key: &str) -> bool {
        self.lowered.contains(key)
    }
}

/// Comparison key of a punctuation-free token: lowercase, accents folded.
pub fn case_key(token: &str) -> String {
    fold_accents(&token.to_lowercase())
}

pub fn is_upper_initial(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

fn case_counts(corpus: &Corpus, config: &PreprocessConfig) -> BTreeMap<String, (usize, usize)> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for token in corpus.tokens() {
        let token = strip_punct(token, &config.punctuation);
        if token.is_empty() {
            continue;
        }
        let entry = counts.entry(case_key(&token)).or_default();
        if is_upper_initial(&token) {
            entry.1 += 1;
        } else {
            entry.0 += 1;
        }
    }
    counts
}

/// One decision per word form seen at least once with an uppercase initial,
/// sorted by form. The corpus must already be concat-mapped.
pub fn compute_case_decisions(corpus: &Corpus, config: &PreprocessConfig) -> Vec<CaseDecision> {
    case_counts(corpus, config)
        .into_iter()
        .filter(|(_, (_, upper))| *upper > 0)
        .map(|(word, (n_lower, n_upper))| CaseDecision {
            lowered: gamma_rule(n_lower, n_upper, config.gamma),
            word,
            n_lower,
            n_upper,
        })
        .collect()
}

fn case_model(corpus: &Corpus, config: &PreprocessConfig) -> CaseModel {
    CaseModel {
        lowered: case_counts(corpus, config)
            .into_iter()
            .filter(|(_, (lower, upper))| gamma_rule(*lower, *upper, config.gamma))
            .map(|(w, _)| w)
            .collect(),
    }
}

fn strip_punct(text: &str, punctuation: &BTreeSet<char>) -> String {
    text.chars().filter(|c| !punctuation.contains(c)).collect()
}

/// Removes combining marks after canonical decomposition, keeping `ñ`/`Ñ`.
fn fold_accents(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.nfc() {
        if c == 'ñ' || c == 'Ñ' {
            out.push(c);
        } else {
            out.extend(std::iter::once(c).nfd().filter(|d| !is_combining_mark(*d)));
        }
    }
    out
}

pub fn strip_accents_and_punct(text: &str, config: &PreprocessConfig) -> String {
    fold_accents(&strip_punct(text, &config.punctuation))
}

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Exact, case-sensitive removal.
pub fn remove_stopwords<S: AsRef<str>>(tokens: &[S], config: &PreprocessConfig) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !config.stopwords.contains(*t))
        .map(str::to_string)
        .collect()
}

/// Configuration plus case decisions, enough to filter unseen text the same
/// way the training corpus was filtered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenPreprocess {
    pub config: PreprocessConfig,
    pub case: CaseModel,
}

/// Reusable filter over one configuration and one set of case decisions.
pub struct TextFilter<'a> {
    config: &'a PreprocessConfig,
    case: &'a CaseModel,
    matcher: ConcatMatcher,
}

impl<'a> TextFilter<'a> {
    pub fn new(config: &'a PreprocessConfig, case: &'a CaseModel) -> Self {
        Self {
            config,
            case,
            matcher: ConcatMatcher::new(&config.concat_map),
        }
    }

    pub fn filter(&self, text: &str) -> Vec<String> {
        self.filter_joined(&self.matcher.apply(text))
    }

    /// Same as [`filter`](Self::filter) for text that is already concat-mapped.
    fn filter_joined(&self, joined: &str) -> Vec<String> {
        let mut out = Vec::new();
        for raw in tokenize(joined) {
            let token = strip_punct(raw, &self.config.punctuation);
            if token.is_empty() {
                continue;
            }
            let token = if self.case.lowers(&case_key(&token)) {
                token.to_lowercase()
            } else {
                token
            };
            let token = fold_accents(&token);
            if token.is_empty() || self.config.stopwords.contains(&token) {
                continue;
            }
            out.push(token);
        }
        out
    }
}

impl FrozenPreprocess {
    /// Filters `text` repeatedly until it stops changing, like the corpus
    /// pipeline.
    pub fn filter(&self, text: &str) -> Vec<String> {
        let filter = TextFilter::new(&self.config, &self.case);
        let mut tokens = filter.filter(text);
        loop {
            let next = filter.filter(&tokens.join(" "));
            if next == tokens {
                return tokens;
            }
            tokens = next;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub corpus: Corpus,
    pub decisions: Vec<CaseDecision>,
    pub case: CaseModel,
    /// Ids of records whose text is empty after filtering. They stay in the
    /// corpus with empty text.
    pub empty_ids: Vec<String>,
}

impl Preprocessed {
    pub fn frozen(&self, config: &PreprocessConfig) -> FrozenPreprocess {
        FrozenPreprocess {
            config: config.clone(),
            case: self.case.clone(),
        }
    }
}

/// One pass of concat map, case rule, accent and punctuation stripping,
/// tokenization and stop-word removal.
fn single_pass(corpus: &Corpus, config: &PreprocessConfig) -> (Corpus, Vec<CaseDecision>, CaseModel) {
    let matcher = ConcatMatcher::new(&config.concat_map);
    let joined = Corpus::derived(
        corpus
            .records()
            .iter()
            .map(|r| LyricRecord {
                text: matcher.apply(&r.text),
                ..r.clone()
            })
            .collect(),
    );
    let decisions = compute_case_decisions(&joined, config);
    let case = case_model(&joined, config);
    let filter = TextFilter::new(config, &case);
    let records = joined
        .into_records()
        .into_iter()
        .map(|r| LyricRecord {
            text: filter.filter_joined(&r.text).join(" "),
            ..r
        })
        .collect();
    (Corpus::derived(records), decisions, case)
}

/// Runs the filtering pass until the corpus stops changing, so the result
/// is a fixed point. Filtering can bring the words of a multiword name
/// together ("Santa de Ana"), which a further pass joins; every pass that
/// changes anything removes tokens or capitals, so the loop terminates.
///
/// `decisions` are those of the first pass, tallied over the input corpus;
/// `case` lowers every form lowered by any pass.
pub fn preprocess_corpus(corpus: &Corpus, config: &PreprocessConfig) -> Result<Preprocessed> {
    config.validate()?;
    let (mut current, decisions, mut case) = single_pass(corpus, config);
    loop {
        let (next, _, more) = single_pass(&current, config);
        case.lowered.extend(more.lowered);
        if next.records() == current.records() {
            break;
        }
        current = next;
    }
    let empty_ids = current
        .records()
        .iter()
        .filter(|r| r.text.is_empty())
        .map(|r| r.id.clone())
        .collect();
    Ok(Preprocessed {
        corpus: current,
        decisions,
        case,
        empty_ids,
    })
}
