//! Multinomial naive Bayes with Lidstone smoothing over TF-IDF rows.
//!
//! For class `C` with TF-IDF mass `m(w, C) = Σ_{d ∈ C} TF-IDF(w, d)`:
//!
//! ```text
//! P(w|C)       = (α + m(w, C)) / Σ_w' (α + m(w', C))
//! Score(C | d) = ln P(C) + Σ_{w ∈ d} ln P(w|C) · TF-IDF(w, d)
//! ```
//!
//! Everything is accumulated in log space.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::FrozenPreprocess;
use crate::vectorize::{SparseRow, TfIdfMatrix, Vocabulary};

pub const MODEL_VERSION: &str = "mnb-v1";

/// Per-class document counts and TF-IDF mass of a training matrix. Empty rows
/// are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMasses {
    classes: Vec<String>,
    class_docs: Vec<usize>,
    mass: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

impl ClassMasses {
    pub fn accumulate<S: AsRef<str>>(matrix: &TfIdfMatrix, labels: &[S]) -> Result<Self> {
        if labels.len() != matrix.n_rows() {
            return Err(Error::LabelMismatch {
                labels: labels.len(),
                rows: matrix.n_rows(),
            });
        }
        let mut classes: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        classes.sort();
        classes.dedup();
        let mut class_docs = vec![0usize; classes.len()];
        let mut mass = vec![vec![0.0f64; matrix.n_cols]; classes.len()];
        for (row, label) in matrix.rows.iter().zip(labels) {
            if row.is_empty() {
                continue;
            }
            let c = classes.binary_search_by(|x| x.as_str().cmp(label.as_ref())).expect("label indexed");
            class_docs[c] += 1;
            for (w, v) in row.iter() {
                mass[c][w] += v;
            }
        }
        if let Some(c) = class_docs.iter().position(|&n| n == 0) {
            return Err(Error::EmptyClass(classes[c].clone()));
        }
        let totals = mass.iter().map(|m| m.iter().sum()).collect();
        Ok(Self {
            classes,
            class_docs,
            mass,
            totals,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn log_priors(&self) -> Vec<f64> {
        let n: usize = self.class_docs.iter().sum();
        self.class_docs.iter().map(|&k| (k as f64 / n as f64).ln()).collect()
    }

    /// `ln Σ_w (α + m(w, C))`.
    pub fn log_denominator(&self, class: usize, alpha: f64) -> f64 {
        (self.mass[class].len() as f64 * alpha + self.totals[class]).ln()
    }

    /// `ln P(w|C)` given the class's log denominator.
    pub fn log_prob(&self, class: usize, word: usize, alpha: f64, log_denominator: f64) -> f64 {
        (alpha + self.mass[class][word]).ln() - log_denominator
    }

    /// Fitted model for one smoothing value.
    pub fn model(&self, vocab: &Vocabulary, alpha: f64) -> Result<MnbModel> {
        check_alpha(alpha)?;
        let n: usize = self.class_docs.iter().sum();
        let word_logprob = (0..self.classes.len())
            .map(|c| {
                let den = self.log_denominator(c, alpha);
                (0..self.mass[c].len()).map(|w| self.log_prob(c, w, alpha, den)).collect()
            })
            .collect();
        Ok(MnbModel {
            classes: self.classes.clone(),
            priors: self.class_docs.iter().map(|&k| k as f64 / n as f64).collect(),
            word_logprob,
            alpha,
            vocab: vocab.clone(),
        })
    }

    /// Index of the predicted class for `row` under smoothing `alpha`, without
    /// materializing the full log-probability table. Gives the same scores as
    /// [`MnbModel::score`] on the model fitted with `alpha`.
    pub fn predict_with(&self, alpha: f64, row: &SparseRow) -> usize {
        let scores: Vec<f64> = self
            .log_priors()
            .into_iter()
            .enumerate()
            .map(|(c, prior)| {
                let den = self.log_denominator(c, alpha);
                prior + row.iter().map(|(w, t)| self.log_prob(c, w, alpha, den) * t).sum::<f64>()
            })
            .collect();
        argmax(&scores)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::AlphaNonPositive(alpha))
    }
}

/// First index of the maximum.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnbModel {
    classes: Vec<String>,
    priors: Vec<f64>,
    word_logprob: Vec<Vec<f64>>,
    alpha: f64,
    vocab: Vocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    /// In model class order.
    pub scores: Vec<(String, f64)>,
    pub predicted: String,
}

/// Fits priors and smoothed word log-probabilities. `labels` align with the
/// matrix rows; empty rows are ignored. Classes are sorted.
pub fn fit<S: AsRef<str>>(matrix: &TfIdfMatrix, vocab: &Vocabulary, labels: &[S], alpha: f64) -> Result<MnbModel> {
    check_alpha(alpha)?;
    ClassMasses::accumulate(matrix, labels)?.model(vocab, alpha)
}

impl MnbModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// `ln P(w|C)` for every vocabulary word, in vocabulary order.
    pub fn log_probs(&self, class: usize) -> &[f64] {
        &self.word_logprob[class]
    }

    fn raw_scores(&self, row: &SparseRow) -> Vec<f64> {
        self.priors
            .iter()
            .zip(&self.word_logprob)
            .map(|(p, logp)| p.ln() + row.iter().map(|(w, t)| logp[w] * t).sum::<f64>())
            .collect()
    }

    pub fn predict_index(&self, row: &SparseRow) -> usize {
        argmax(&self.raw_scores(row))
    }

    /// An empty row scores each class by its log prior alone.
    pub fn score(&self, row: &SparseRow) -> ClassScores {
        let raw = self.raw_scores(row);
        let predicted = self.classes[argmax(&raw)].clone();
        ClassScores {
            scores: self.classes.iter().cloned().zip(raw).collect(),
            predicted,
        }
    }

    /// `(word, ln P(w|C))` by descending probability, ties lexicographic.
    pub fn word_logprob_table(&self, class: &str) -> Result<Vec<(String, f64)>> {
        let c = self.class_index(class).ok_or_else(|| Error::UnknownClass(class.to_string()))?;
        let mut table: Vec<(String, f64)> = self
            .vocab
            .words()
            .iter()
            .cloned()
            .zip(self.word_logprob[c].iter().copied())
            .collect();
        // Vocabulary order is lexicographic, so a stable sort keeps ties in order.
        table.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(table)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    classes: Vec<String>,
    priors: Vec<f64>,
    alpha: f64,
    vocabulary: Vocabulary,
    word_logprob: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preprocess: Option<FrozenPreprocess>,
}

/// Writes the model as a single `mnb-v1` JSON document, optionally with the
/// preprocessing that produced its training text.
pub fn write_model<W: Write>(model: &MnbModel, preprocess: Option<&FrozenPreprocess>, writer: W) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION.to_string(),
        classes: model.classes.clone(),
        priors: model.priors.clone(),
        alpha: model.alpha,
        vocabulary: model.vocab.clone(),
        word_logprob: model.word_logprob.clone(),
        preprocess: preprocess.cloned(),
    };
    serde_json::to_writer(writer, &file).map_err(|e| Error::Model(e.to_string()))
}

pub fn read_model<R: Read>(reader: R) -> Result<(MnbModel, Option<FrozenPreprocess>)> {
    let file: ModelFile = serde_json::from_reader(reader).map_err(|e| Error::Model(e.to_string()))?;
    if file.version != MODEL_VERSION {
        return Err(Error::Model(format!("unsupported version {:?}", file.version)));
    }
    check_alpha(file.alpha)?;
    let n = file.classes.len();
    if n == 0 || file.priors.len() != n || file.word_logprob.len() != n {
        return Err(Error::Model("class, prior and log-probability counts disagree".into()));
    }
    if file.word_logprob.iter().any(|row| row.len() != file.vocabulary.len()) {
        return Err(Error::Model("log-probability rows do not match the vocabulary".into()));
    }
    Ok((
        MnbModel {
            classes: file.classes,
            priors: file.priors,
            word_logprob: file.word_logprob,
            alpha: file.alpha,
            vocab: file.vocabulary,
        },
        file.preprocess,
    ))
}
