use std::io::Cursor;

use lexpalo::corpus_io::{filter_top_palos, parse_jsonl, write_jsonl, SplitSpec};
use lexpalo::experiments::{aggregate, alpha_sweep, essential_words, run_trainings, DEFAULT_EPSILON};
use lexpalo::genre_graph::{distance_matrix, hierarchical_cluster, minimum_spanning_tree, palo_vectors, Linkage};
use lexpalo::mnb::{fit, read_model, write_model};
use lexpalo::preprocess::{preprocess_corpus, PreprocessConfig};
use lexpalo::seed::rng;
use lexpalo::vectorize::{build_vocabulary, tfidf, tfidf_row};
use rand::seq::IndexedRandom;
use rand::Rng;

const SHARED: &[&str] = &["Pena", "corazón", "madre", "noche", "quiero", "llorar", "vida", "sangre"];

fn palo_words(palo: &str) -> &'static [&'static str] {
    match palo {
        "alegrias" => &["Cádiz", "Muralla", "Real", "mar", "Navarra", "barrio"],
        "solea" => &["soledad", "pena", "camino", "fatiga", "piedra", "muerte"],
        "tangos" => &["Triana", "gitana", "compás", "fiesta", "Sevilla", "baile"],
        _ => &["raro"],
    }
}

/// JSONL text with `per_palo` generated lyrics per palo plus a tiny palo that
/// the size filter should drop.
fn synthetic_jsonl(per_palo: usize, seed: u64) -> String {
    let mut r = rng(seed);
    let mut records = Vec::new();
    let mut id = 0;
    for palo in ["alegrias", "solea", "tangos"] {
        for _ in 0..per_palo {
            let len = r.random_range(6..14);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if r.random_bool(0.5) {
                        *palo_words(palo).choose(&mut r).unwrap()
                    } else {
                        *SHARED.choose(&mut r).unwrap()
                    }
                })
                .collect();
            records.push(serde_json::json!({"id": format!("s{id}"), "palo": palo, "text": words.join(" ")}));
            id += 1;
        }
    }
    records.push(serde_json::json!({"id": "tiny", "palo": "rare", "text": "raro raro"}));
    records.iter().map(|r| r.to_string() + "\n").collect()
}

#[test]
fn end_to_end_pipeline() {
    let raw = parse_jsonl(Cursor::new(synthetic_jsonl(40, 11))).unwrap();
    assert_eq!(raw.len(), 121);
    let corpus = filter_top_palos(&raw, 10).unwrap();
    assert_eq!(corpus.palos().collect::<Vec<_>>(), ["alegrias", "solea", "tangos"]);

    let config = PreprocessConfig::default();
    let pre = preprocess_corpus(&corpus, &config).unwrap();
    let clean = &pre.corpus;
    assert!(clean.tokens().all(|t| t.chars().all(|c| c.is_alphanumeric() || c == '_')));
    let pena = pre.decisions.iter().find(|d| d.word == "pena").unwrap();
    assert!(pena.n_lower > 0 && pena.n_upper > 0);
    assert_eq!(pena.lowered, !clean.tokens().any(|t| t == "Pena"));

    let split = SplitSpec::new(0.85, 5).unwrap();
    let runs = run_trainings(clean, 0.11, &split, 6).unwrap();
    let again = run_trainings(clean, 0.11, &split, 6).unwrap();
    let report = aggregate(&runs).unwrap();
    assert_eq!(report, aggregate(&again).unwrap());
    assert!(report.mean_global_accuracy > 0.8, "{}", report.mean_global_accuracy);

    let sweep = alpha_sweep(clean, 0.25, 4, &split).unwrap();
    assert_eq!(sweep.grid.len(), 4);
    assert!(sweep.grid.contains(&sweep.best_alpha));

    let essential = essential_words(clean, 0.11, 8, &split, DEFAULT_EPSILON).unwrap();
    let top_alegrias = &essential.per_palo["alegrias"];
    assert!(!top_alegrias.is_empty());
    let foreign = ["soledad", "camino", "fatiga", "piedra", "muerte", "Triana", "gitana", "fiesta", "Sevilla", "baile"];
    assert!(top_alegrias.iter().all(|w| !foreign.contains(&w.as_str())), "{top_alegrias:?}");

    let vectors = palo_vectors(clean).unwrap();
    let m = distance_matrix(&vectors).unwrap();
    assert_eq!(m.len(), 3);
    let d = hierarchical_cluster(&m, Linkage::Average).unwrap();
    assert_eq!(d.merges.len(), 2);
    let t = minimum_spanning_tree(&m).unwrap();
    assert_eq!(t.edges.len(), 2);
}

#[test]
fn saved_model_classifies_like_the_fitted_one() {
    let corpus = parse_jsonl(Cursor::new(synthetic_jsonl(30, 3))).unwrap();
    let corpus = filter_top_palos(&corpus, 10).unwrap();
    let config = PreprocessConfig::default();
    let pre = preprocess_corpus(&corpus, &config).unwrap();
    let vocab = build_vocabulary(&pre.corpus).unwrap();
    let matrix = tfidf(&pre.corpus, &vocab).unwrap();
    let labels: Vec<&str> = pre.corpus.records().iter().map(|r| r.palo.as_str()).collect();
    let model = fit(&matrix, &vocab, &labels, 0.11).unwrap();

    let mut buf = Vec::new();
    write_model(&model, Some(&pre.frozen(&config)), &mut buf).unwrap();
    let (loaded, frozen) = read_model(buf.as_slice()).unwrap();
    let frozen = frozen.unwrap();
    assert_eq!(loaded, model);

    let text = "¡Ay, Cádiz! la Muralla Real y el mar";
    let row = tfidf_row(&frozen.filter(text), loaded.vocab());
    assert_eq!(loaded.score(&row).predicted, "alegrias");
}

#[test]
fn jsonl_round_trip_preserves_corpus() {
    let corpus = parse_jsonl(Cursor::new(synthetic_jsonl(5, 1))).unwrap();
    let mut out = Vec::new();
    write_jsonl(&corpus, &mut out).unwrap();
    let back = parse_jsonl(Cursor::new(out)).unwrap();
    assert_eq!(back.records(), corpus.records());
}
