//! Lexical richness and distribution statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::corpus_io::{concat_by_palo, Corpus};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LexicalProfile {
    pub tokens: usize,
    pub types: usize,
    pub ttr: f64,
}

/// Token count, type count and type-token ratio `|V| / L`.
pub fn profile<S: AsRef<str>>(document: &[S]) -> Result<LexicalProfile> {
    if document.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let types = document.iter().map(AsRef::as_ref).collect::<HashSet<&str>>().len();
    Ok(LexicalProfile {
        tokens: document.len(),
        types,
        ttr: types as f64 / document.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SttrResult {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_windows)`; zero for one window.
    pub stderr: f64,
    pub window_length: usize,
    pub n_windows: usize,
    pub window_ttrs: Vec<f64>,
}

/// Standardized TTR: the mean TTR of `n_windows` contiguous windows of
/// `window_length` tokens, drawn with replacement at uniform start offsets.
///
/// A window as long as the document is taken once, giving the whole-document
/// TTR with zero error.
pub fn sttr<S: AsRef<str>>(document: &[S], window_length: usize, n_windows: usize, seed: u64) -> Result<SttrResult> {
    if window_length == 0 || n_windows == 0 {
        return Err(Error::InvalidConfig("sTTR needs a positive window length and window count".into()));
    }
    if window_length > document.len() {
        return Err(Error::WindowTooLong {
            window: window_length,
            len: document.len(),
        });
    }
    let window_ttr = |start: usize| {
        let types: HashSet<&str> = document[start..start + window_length].iter().map(AsRef::as_ref).collect();
        types.len() as f64 / window_length as f64
    };

    let window_ttrs: Vec<f64> = if window_length == document.len() {
        vec![window_ttr(0)]
    } else {
        let mut rng = seed::rng(seed);
        let last_start = document.len() - window_length;
        (0..n_windows).map(|_| window_ttr(rng.random_range(0..=last_start))).collect()
    };
    let (mean, stderr) = mean_and_stderr(&window_ttrs);
    Ok(SttrResult {
        mean,
        stderr,
        window_length,
        n_windows: window_ttrs.len(),
        window_ttrs,
    })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SongHapax {
    pub id: String,
    pub palo: String,
    /// Share of the song's types that occur in no other palo.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HapaxReport {
    /// Songs with at least one token, in corpus order.
    pub per_song: Vec<SongHapax>,
    pub per_palo_unique: BTreeMap<String, BTreeSet<String>>,
    /// `|unique ∩ essential|` per palo, when essential lists were supplied.
    pub shared_with_essential: Option<BTreeMap<String, usize>>,
}

/// Palo-level hapax legomena: types that occur in exactly one palo's
/// aggregate. The corpus should be preprocessed.
pub fn hapax_report(corpus: &Corpus, essential: Option<&BTreeMap<String, Vec<String>>>) -> HapaxReport {
    let aggregates = concat_by_palo(corpus);
    let mut owners: HashMap<&str, Vec<&str>> = HashMap::new();
    for (palo, record) in &aggregates {
        for token in record.tokens().collect::<HashSet<_>>() {
            owners.entry(token).or_default().push(palo);
        }
    }
    let mut per_palo_unique: BTreeMap<String, BTreeSet<String>> =
        aggregates.keys().map(|p| (p.clone(), BTreeSet::new())).collect();
    for (word, palos) in &owners {
        if let [only] = palos.as_slice() {
            per_palo_unique.get_mut(*only).expect("palo exists").insert(word.to_string());
        }
    }

    let per_song = corpus
        .records()
        .iter()
        .filter_map(|r| {
            let types: HashSet<&str> = r.tokens().collect();
            if types.is_empty() {
                return None;
            }
            let unique = &per_palo_unique[&r.palo];
            let hapax = types.iter().filter(|t| unique.contains(**t)).count();
            Some(SongHapax {
                id: r.id.clone(),
                palo: r.palo.clone(),
                ratio: hapax as f64 / types.len() as f64,
            })
        })
        .collect();

    let shared_with_essential = essential.map(|lists| {
        per_palo_unique
            .iter()
            .map(|(palo, unique)| {
                let shared = lists
                    .get(palo)
                    .map(|ws| ws.iter().collect::<HashSet<_>>().into_iter().filter(|w| unique.contains(*w)).count())
                    .unwrap_or(0);
                (palo.clone(), shared)
            })
            .collect()
    });

    HapaxReport {
        per_song,
        per_palo_unique,
        shared_with_essential,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Slope of the log-log least-squares line.
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Inclusive range of the independent variable (rank or token count).
    pub fit_range: (usize, usize),
}

/// Ordinary least squares of `ln y` on `ln x`.
fn log_log_fit(points: &[(usize, usize)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} point(s) in the fit range", points.len())));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| ((x as f64).ln(), (y as f64).ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("independent variable is constant".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(PowerLawFit {
        exponent: slope,
        intercept: my - slope * mx,
        r_squared,
        fit_range: (points[0].0, points[points.len() - 1].0),
    })
}

/// Inclusive 1-based rank interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankRange {
    pub min: usize,
    pub max: usize,
}

impl RankRange {
    /// `[10, |V| / 10]`, or every rank when that leaves fewer than two.
    pub fn default_for(n_types: usize) -> Self {
        let max = n_types / 10;
        if max > 10 {
            Self { min: 10, max }
        } else {
            Self { min: 1, max: n_types }
        }
    }
}

/// `(word, frequency)` by descending frequency, ties in lexicographic order.
pub fn rank_frequencies<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Rank-frequency power law fitted over `range` (clipped to the observed
/// ranks). Pass `None` for the default range.
pub fn zipf_fit(corpus: &Corpus, range: Option<RankRange>) -> Result<PowerLawFit> {
    let ranked = rank_frequencies(corpus.tokens());
    let freqs: Vec<usize> = ranked.iter().map(|(_, f)| *f).collect();
    zipf_fit_frequencies(&freqs, range)
}

/// As [`zipf_fit`] over frequencies already sorted in descending order.
pub fn zipf_fit_frequencies(freqs: &[usize], range: Option<RankRange>) -> Result<PowerLawFit> {
    if freqs.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two types".into()));
    }
    if freqs.iter().all(|&f| f == freqs[0]) {
        return Err(Error::DegenerateFit("all frequencies are equal".into()));
    }
    let range = range.unwrap_or_else(|| RankRange::default_for(freqs.len()));
    let lo = range.min.max(1);
    let hi = range.max.min(freqs.len());
    let points: Vec<(usize, usize)> = (lo..=hi).map(|rank| (rank, freqs[rank - 1])).collect();
    log_log_fit(&points)
}

/// Number of log-spaced checkpoints on the Heaps curve.
pub const HEAPS_CHECKPOINTS: usize = 200;

/// Vocabulary growth `(L, |V|)` for one seeded shuffle of the record order,
/// with a power law fitted over the top decade of `L`.
pub fn heaps_curve(corpus: &Corpus, seed: u64) -> Result<(Vec<(usize, usize)>, PowerLawFit)> {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let tokens: Vec<&str> = order.iter().flat_map(|&i| corpus.records()[i].tokens()).collect();
    let total = tokens.len();
    if total < 2 {
        return Err(Error::DegenerateFit(format!("{total} token(s)")));
    }

    let mut checkpoints: Vec<usize> = (0..HEAPS_CHECKPOINTS)
        .map(|k| {
            let e = k as f64 / (HEAPS_CHECKPOINTS - 1) as f64;
            ((total as f64).powf(e).round() as usize).clamp(1, total)
        })
        .collect();
    checkpoints.dedup();

    let mut seen: HashSet<&str> = HashSet::new();
    let mut curve = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (i, t) in tokens.iter().enumerate() {
        seen.insert(t);
        if next.peek().is_some_and(|&&c| c == i + 1) {
            next.next();
            curve.push((i + 1, seen.len()));
        }
    }

    let tail_start = total as f64 / 10.0;
    let tail: Vec<(usize, usize)> = curve.iter().copied().filter(|&(l, _)| l as f64 >= tail_start).collect();
    let fit = if tail.len() >= 2 { log_log_fit(&tail)? } else { log_log_fit(&curve)? };
    Ok((curve, fit))
}
