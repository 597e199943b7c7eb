use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use lexpalo::corpus_io::{filter_top_palos, load_corpus, Corpus, Format, SplitSpec};
use lexpalo::experiments::{aggregate, alpha_sweep, essential_words, run_trainings};
use lexpalo::genre_graph::{
    closeness_centrality, complete_graph, distance_matrix, export_dot, hierarchical_cluster, minimum_spanning_tree,
    palo_vectors, DistanceMatrix, Linkage,
};
use lexpalo::lexstats::{hapax_report, heaps_curve, profile, rank_frequencies, sttr, zipf_fit, PowerLawFit};
use lexpalo::mnb::{fit, read_model, write_model};
use lexpalo::preprocess::{parse_concat_map, parse_stopwords, preprocess_corpus, PreprocessConfig, Preprocessed};
use lexpalo::seed::run_seed;
use lexpalo::vectorize::{build_vocabulary, tfidf, tfidf_row};

use crate::output::{num, read_text, CliError, CliResult, OutDir};
use crate::{CorpusArgs, SplitArgs};

const ALL: &str = "ALL";

/// The corpus as loaded, the palo-filtered corpus and its preprocessing.
struct Loaded {
    raw: Corpus,
    config: PreprocessConfig,
    pre: Preprocessed,
}

fn preprocess_config(args: &CorpusArgs) -> CliResult<PreprocessConfig> {
    let mut config = PreprocessConfig {
        gamma: args.gamma,
        ..PreprocessConfig::default()
    };
    if let Some(path) = &args.stopwords {
        config.stopwords = parse_stopwords(&read_text(path)?);
    }
    if let Some(path) = &args.concat_map {
        config.concat_map = parse_concat_map(&read_text(path)?)?;
    }
    config.validate()?;
    Ok(config)
}

fn load(args: &CorpusArgs) -> CliResult<Loaded> {
    let config = preprocess_config(args)?;
    let format = args.format.unwrap_or_else(|| Format::from_path(&args.corpus));
    let raw = load_corpus(&args.corpus, format)?;
    let filtered = filter_top_palos(&raw, args.min_lyrics)?;
    let pre = preprocess_corpus(&filtered, &config)?;
    if !pre.empty_ids.is_empty() {
        eprintln!(
            "lexpalo: warning: {} record(s) are empty after preprocessing and are left out of training",
            pre.empty_ids.len()
        );
    }
    Ok(Loaded { raw, config, pre })
}

fn split_spec(args: &SplitArgs, seed: u64) -> CliResult<SplitSpec> {
    Ok(SplitSpec::new(args.train_fraction, seed)?)
}

fn check_runs(runs: usize, min: usize) -> CliResult<()> {
    if runs < min {
        return Err(CliError::Config(format!("--runs must be at least {min}, got {runs}")));
    }
    Ok(())
}

fn palo_tokens<'a>(corpus: &'a Corpus, palo: &str) -> Vec<&'a str> {
    corpus.records_of(palo).flat_map(|r| r.tokens()).collect()
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn fit_row(law: &str, f: &PowerLawFit) -> Vec<String> {
    vec![
        law.to_string(),
        num(f.exponent),
        num(f.intercept),
        num(f.r_squared),
        f.fit_range.0.to_string(),
        f.fit_range.1.to_string(),
    ]
}

pub fn stats(args: &CorpusArgs, windows: usize) -> CliResult<String> {
    if windows == 0 {
        return Err(CliError::Config("--windows must be at least 1".into()));
    }
    let loaded = load(args)?;
    let out = OutDir::create(&args.out)?;
    let corpus = &loaded.pre.corpus;
    let palos: Vec<&str> = corpus.palos().collect();

    let mut profiles = Vec::new();
    for palo in &palos {
        profiles.push((palo.to_string(), profile(&palo_tokens(corpus, palo))?));
    }
    let all_tokens: Vec<&str> = corpus.tokens().collect();
    let whole = profile(&all_tokens)?;
    profiles.push((ALL.to_string(), whole));
    out.csv(
        "profile.csv",
        &["palo", "tokens", "types", "ttr"],
        profiles
            .iter()
            .map(|(p, x)| [p.clone(), x.tokens.to_string(), x.types.to_string(), num(x.ttr)]),
    )?;

    // Every palo is sampled with windows as long as the smallest palo.
    let window = profiles[..palos.len()].iter().map(|(_, p)| p.tokens).min().unwrap_or(0);
    let mut sttr_rows = Vec::new();
    for (i, palo) in palos.iter().enumerate() {
        let s = sttr(&palo_tokens(corpus, palo), window, windows, run_seed(args.seed, i as u64))?;
        sttr_rows.push((palo.to_string(), s));
    }
    let null = sttr(&all_tokens, window, windows, run_seed(args.seed, palos.len() as u64))?;
    sttr_rows.push((ALL.to_string(), null));
    out.csv(
        "sttr.csv",
        &["palo", "window_length", "n_windows", "mean", "stderr"],
        sttr_rows.iter().map(|(p, s)| {
            [
                p.clone(),
                s.window_length.to_string(),
                s.n_windows.to_string(),
                num(s.mean),
                num(s.stderr),
            ]
        }),
    )?;

    let hapax = hapax_report(corpus, None);
    out.csv(
        "hapax.csv",
        &["id", "palo", "ratio"],
        hapax.per_song.iter().map(|s| [s.id.clone(), s.palo.clone(), num(s.ratio)]),
    )?;
    out.csv(
        "hapax_unique.csv",
        &["palo", "unique_types"],
        hapax.per_palo_unique.iter().map(|(p, set)| [p.clone(), set.len().to_string()]),
    )?;

    // Frequency laws use every loaded lyric with stop words kept.
    let unfiltered = preprocess_corpus(&loaded.raw, &PreprocessConfig::bare(loaded.config.gamma))?.corpus;
    let freqs = rank_frequencies(unfiltered.tokens());
    out.csv(
        "zipf.csv",
        &["rank", "freq"],
        freqs.iter().enumerate().map(|(i, (_, f))| [(i + 1).to_string(), f.to_string()]),
    )?;
    let zipf = zipf_fit(&unfiltered, None)?;
    let (points, heaps) = heaps_curve(&unfiltered, args.seed)?;
    out.csv(
        "heaps.csv",
        &["L", "V"],
        points.iter().map(|(l, v)| [l.to_string(), v.to_string()]),
    )?;
    out.csv(
        "fits.csv",
        &["law", "exponent", "intercept", "r_squared", "fit_min", "fit_max"],
        [fit_row("zipf", &zipf), fit_row("heaps", &heaps)],
    )?;

    Ok(format!(
        "stats: {} lyrics, {} palos, {} tokens, {} types; zipf exponent {:.3}, heaps exponent {:.3}",
        corpus.len(),
        palos.len(),
        whole.tokens,
        whole.types,
        zipf.exponent,
        heaps.exponent
    ))
}

fn matrix_rows(labels: &[String], values: &[Vec<f64>]) -> Vec<Vec<String>> {
    labels
        .iter()
        .zip(values)
        .map(|(l, row)| std::iter::once(l.clone()).chain(row.iter().map(|&x| num(x))).collect())
        .collect()
}

fn matrix_header<'a>(first: &'a str, labels: &'a [String]) -> Vec<&'a str> {
    std::iter::once(first).chain(labels.iter().map(String::as_str)).collect()
}

pub fn train(args: &CorpusArgs, split: &SplitArgs, alpha: f64, runs: usize) -> CliResult<String> {
    check_runs(runs, 1)?;
    let spec = split_spec(split, args.seed)?;
    let loaded = load(args)?;
    let out = OutDir::create(&args.out)?;
    let corpus = &loaded.pre.corpus;

    let results = run_trainings(corpus, alpha, &spec, runs)?;
    let report = aggregate(&results)?;
    let mut rows = Vec::new();
    for (i, r) in results.iter().enumerate() {
        for (palo, a) in &r.per_class_accuracy {
            rows.push([(i + 1).to_string(), r.seed.to_string(), palo.clone(), num(*a)]);
        }
        rows.push([(i + 1).to_string(), r.seed.to_string(), ALL.to_string(), num(r.global_accuracy)]);
    }
    out.csv("accuracy.csv", &["run", "seed", "palo", "accuracy"], rows)?;
    out.csv(
        "accuracy_mean.csv",
        &["palo", "mean_accuracy"],
        report
            .mean_accuracy
            .iter()
            .map(|(p, a)| [p.clone(), num(*a)])
            .chain(std::iter::once([ALL.to_string(), num(report.mean_global_accuracy)])),
    )?;
    let header = matrix_header("true", &report.classes);
    out.csv("confusion_mean.csv", &header, matrix_rows(&report.classes, &report.mean_confusion))?;
    out.csv("confusion_only.csv", &header, matrix_rows(&report.classes, &report.confusion_only))?;

    let vocab = build_vocabulary(corpus)?;
    let matrix = tfidf(corpus, &vocab)?;
    let labels: Vec<&str> = corpus.records().iter().map(|r| r.palo.as_str()).collect();
    let model = fit(&matrix, &vocab, &labels, alpha)?;
    let mut bytes = Vec::new();
    write_model(&model, Some(&loaded.pre.frozen(&loaded.config)), &mut bytes)?;
    out.write("model.json", &bytes)?;

    Ok(format!(
        "train: {runs} runs, alpha {alpha}, mean accuracy {:.4}; full-corpus model in model.json",
        report.mean_global_accuracy
    ))
}

pub fn sweep_alpha(args: &CorpusArgs, split: &SplitArgs, step: f64, runs: usize) -> CliResult<String> {
    check_runs(runs, 1)?;
    let spec = split_spec(split, args.seed)?;
    let loaded = load(args)?;
    let out = OutDir::create(&args.out)?;
    let sweep = alpha_sweep(&loaded.pre.corpus, step, runs, &spec)?;
    out.csv(
        "alpha_sweep.csv",
        &["alpha", "mean_accuracy"],
        sweep
            .grid
            .iter()
            .zip(&sweep.per_alpha_mean_accuracy)
            .map(|(a, m)| [num(*a), num(*m)]),
    )?;
    Ok(format!(
        "sweep-alpha: {} values over {runs} runs, best alpha {} with mean accuracy {:.4}",
        sweep.grid.len(),
        sweep.best_alpha,
        sweep.best_accuracy
    ))
}

pub fn essential(args: &CorpusArgs, split: &SplitArgs, alpha: f64, runs: usize, epsilon: f64) -> CliResult<String> {
    check_runs(runs, 2)?;
    let spec = split_spec(split, args.seed)?;
    let loaded = load(args)?;
    let out = OutDir::create(&args.out)?;
    let corpus = &loaded.pre.corpus;
    let report = essential_words(corpus, alpha, runs, &spec, epsilon)?;
    for (palo, words) in &report.per_palo {
        let mut text = words.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        out.write(&format!("essential_{}.txt", file_safe(palo)), text.as_bytes())?;
    }
    let hapax = hapax_report(corpus, Some(&report.per_palo));
    let shared = hapax.shared_with_essential.unwrap_or_default();
    out.csv(
        "essential_counts.csv",
        &["palo", "count", "normalized", "threshold_word", "unique_types", "shared_with_unique"],
        report.counts.iter().map(|(palo, n)| {
            [
                palo.clone(),
                n.to_string(),
                num(report.normalized[palo]),
                report.threshold_word[palo].clone(),
                hapax.per_palo_unique.get(palo).map_or(0, |s| s.len()).to_string(),
                shared.get(palo).copied().unwrap_or(0).to_string(),
            ]
        }),
    )?;
    let counts: Vec<String> = report.counts.iter().map(|(p, n)| format!("{p} {n}")).collect();
    Ok(format!("essential: {runs} runs; {}", counts.join(", ")))
}

fn palo_distances(args: &CorpusArgs) -> CliResult<DistanceMatrix> {
    let loaded = load(args)?;
    Ok(distance_matrix(&palo_vectors(&loaded.pre.corpus)?)?)
}

pub fn distances(args: &CorpusArgs, linkage: Linkage) -> CliResult<String> {
    let m = palo_distances(args)?;
    let out = OutDir::create(&args.out)?;
    let labels = m.labels().to_vec();
    out.csv("distances.csv", &matrix_header("palo", &labels), matrix_rows(&labels, m.rows()))?;
    let dendrogram = hierarchical_cluster(&m, linkage)?;
    let json = serde_json::to_vec_pretty(&dendrogram).map_err(|e| CliError::Config(e.to_string()))?;
    out.write("dendrogram.json", &json)?;
    out.write("network.dot", export_dot(&complete_graph(&m), &m).as_bytes())?;
    let centrality = closeness_centrality(&m)?;
    out.csv(
        "centrality.csv",
        &["palo", "closeness"],
        centrality.iter().map(|(p, c)| [p.clone(), num(*c)]),
    )?;
    let first = &dendrogram.merges[0];
    Ok(format!(
        "distances: {} palos, max distance {:.4}, first merge {} at {:.4}",
        labels.len(),
        m.max(),
        dendrogram.members(first.id).join("+"),
        first.distance
    ))
}

pub fn mst(args: &CorpusArgs) -> CliResult<String> {
    let m = palo_distances(args)?;
    let out = OutDir::create(&args.out)?;
    let tree = minimum_spanning_tree(&m)?;
    out.write("mst.dot", export_dot(&tree, &m).as_bytes())?;
    let edges: Vec<String> = tree
        .edges
        .iter()
        .map(|e| format!("{}-{}", tree.nodes[e.u], tree.nodes[e.v]))
        .collect();
    Ok(format!("mst: total weight {:.4}; {}", tree.total_weight(), edges.join(", ")))
}

pub fn classify(model_path: &Path, text: &str, show_scores: bool) -> CliResult<String> {
    let file = File::open(model_path).map_err(|source| CliError::Read {
        path: model_path.to_path_buf(),
        source,
    })?;
    let (model, frozen) = read_model(BufReader::new(file))?;
    let frozen = frozen.ok_or_else(|| lexpalo::Error::Model("model has no stored preprocessing".into()))?;
    let row = tfidf_row(&frozen.filter(text), model.vocab());
    let scores = model.score(&row);
    if !show_scores {
        return Ok(scores.predicted);
    }
    let mut out = scores.predicted.clone();
    for (c, s) in &scores.scores {
        out.push_str(&format!("\n{c}\t{s}"));
    }
    Ok(out)
}
