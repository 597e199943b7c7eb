//! Vocabulary and row-normalized TF-IDF document-term matrix.
//!
//! `TF-IDF(w, d) = tf(w, d) * (1 + ln(|D| / df(w)))` with `tf` the count of
//! `w` in `d` divided by the token length of `d`. `|D|` and `df` always come
//! from the corpus the vocabulary was built on. Each row is then scaled to unit
//! Euclidean norm.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    words: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyData {
    words: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
}

impl TryFrom<VocabularyData> for Vocabulary {
    type Error = Error;

    fn try_from(d: VocabularyData) -> Result<Self> {
        Vocabulary::from_parts(d.words, d.df, d.n_docs)
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        Self {
            words: v.words,
            df: v.df,
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    /// Rebuilds a vocabulary from sorted distinct words and their document
    /// frequencies.
    pub fn from_parts(words: Vec<String>, df: Vec<usize>, n_docs: usize) -> Result<Self> {
        if words.len() != df.len() {
            return Err(Error::Model(format!("{} words but {} document frequencies", words.len(), df.len())));
        }
        if words.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Model("vocabulary words must be sorted and distinct".into()));
        }
        if df.iter().any(|&f| f == 0 || f > n_docs) {
            return Err(Error::Model("document frequency out of range".into()));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self {
            words,
            df,
            n_docs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Number of non-empty documents the vocabulary was built from.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// `1 + ln(|D| / df(w))`.
    pub fn idf(&self, index: usize) -> f64 {
        1.0 + (self.n_docs as f64 / self.df[index] as f64).ln()
    }
}

/// Words sorted lexicographically with exact document frequencies. Records
/// with no tokens are not counted as documents.
pub fn build_vocabulary(train: &Corpus) -> Result<Vocabulary> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n_docs = 0;
    for record in train.records() {
        let mut types: Vec<&str> = record.tokens().collect();
        if types.is_empty() {
            continue;
        }
        n_docs += 1;
        types.sort_unstable();
        types.dedup();
        for t in types {
            *df.entry(t).or_default() += 1;
        }
    }
    if n_docs == 0 {
        return Err(Error::EmptyCorpus);
    }
    let (words, df): (Vec<String>, Vec<usize>) = df.into_iter().map(|(w, c)| (w.to_string(), c)).unzip();
    Vocabulary::from_parts(words, df, n_docs)
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> f64 {
        self.indices.binary_search(&index).map_or(0.0, |k| self.values[k])
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseRow) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfMatrix {
    pub rows: Vec<SparseRow>,
    pub doc_ids: Vec<String>,
    /// Rows with no in-vocabulary word; they are all zero.
    pub empty_rows: Vec<usize>,
    pub n_cols: usize,
}

impl TfIdfMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// TF-IDF weights of one tokenized document before row normalization.
/// Out-of-vocabulary tokens count toward the document length but get no
/// weight.
pub fn raw_tfidf<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseRow {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let len = tokens.len() as f64;
    let (indices, values) = counts
        .into_iter()
        .map(|(i, c)| (i, c as f64 / len * vocab.idf(i)))
        .unzip();
    SparseRow { indices, values }
}

/// Unit-norm TF-IDF vector of one tokenized document; empty when no token is
/// in the vocabulary.
pub fn tfidf_row<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseRow {
    let mut row = raw_tfidf(tokens, vocab);
    let norm = row.norm();
    for v in &mut row.values {
        *v /= norm;
    }
    row
}

pub fn tfidf(docs: &Corpus, vocab: &Vocabulary) -> Result<TfIdfMatrix> {
    if vocab.is_empty() {
        return Err(Error::VocabularyMismatch);
    }
    let rows: Vec<SparseRow> = docs
        .records()
        .par_iter()
        .map(|r| tfidf_row(&r.tokens().collect::<Vec<_>>(), vocab))
        .collect();
    let empty_rows = rows.iter().enumerate().filter(|(_, r)| r.is_empty()).map(|(i, _)| i).collect();
    Ok(TfIdfMatrix {
        rows,
        doc_ids: docs.records().iter().map(|r| r.id.clone()).collect(),
        empty_rows,
        n_cols: vocab.len(),
    })
}

/// Debug dump: one `doc_id,word,weight` line per non-zero entry.
pub fn write_triples<W: Write>(matrix: &TfIdfMatrix, vocab: &Vocabulary, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["doc_id", "word", "weight"])?;
    for (id, row) in matrix.doc_ids.iter().zip(&matrix.rows) {
        for (i, v) in row.iter() {
            w.write_record([id.as_str(), vocab.words()[i].as_str(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
