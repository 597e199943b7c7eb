//! Labeled lyric corpora: loading, validation, palo filtering, stratified
//! splitting and per-palo aggregation.
//!
//! The canonical on-disk format is JSONL with one object per line carrying
//! the required string keys `id`, `palo` and `text`. Any other key is kept in
//! the record's metadata. CSV input needs a header row with the same names.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::seed;

pub const AGGREGATE_PREFIX: &str = "__agg__";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LyricRecord {
    pub id: String,
    pub text: String,
    pub palo: String,
    pub metadata: BTreeMap<String, String>,
}

impl LyricRecord {
    pub fn new(id: impl Into<String>, palo: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            palo: palo.into(),
            metadata: BTreeMap::new(),
        }
    }

    /// Whitespace tokens of the record text.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guess from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown corpus format {other:?}"))),
        }
    }
}

/// An ordered, immutable collection of records with a palo index.
///
/// Corpora built with [`Corpus::new`] satisfy every record invariant. Corpora
/// produced by the pipeline (preprocessing, splitting) may hold records whose
/// text became empty after filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<LyricRecord>,
    palo_index: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    /// Validates and indexes `records`. Positions in errors are 1-based.
    pub fn new(records: Vec<LyricRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let position = i + 1;
            check_record(r).map_err(|message| Error::InvalidRecord { position, message })?;
            if let Some(first) = seen.insert(r.id.as_str(), position) {
                return Err(Error::DuplicateId {
                    id: r.id.clone(),
                    first,
                    second: position,
                });
            }
        }
        Ok(Self::derived(records))
    }

    /// Indexes records that come out of the pipeline without re-validating
    /// them.
    pub(crate) fn derived(records: Vec<LyricRecord>) -> Self {
        let mut palo_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            palo_index.entry(r.palo.clone()).or_default().push(i);
        }
        Self {
            records,
            palo_index,
        }
    }

    pub fn records(&self) -> &[LyricRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Palo labels in lexicographic order.
    pub fn palos(&self) -> impl Iterator<Item = &str> {
        self.palo_index.keys().map(String::as_str)
    }

    pub fn palo_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.palo_index
    }

    pub fn records_of<'a>(&'a self, palo: &str) -> impl Iterator<Item = &'a LyricRecord> + 'a {
        self.palo_index
            .get(palo)
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    pub fn palo_counts(&self) -> BTreeMap<&str, usize> {
        self.palo_index
            .iter()
            .map(|(p, ix)| (p.as_str(), ix.len()))
            .collect()
    }

    /// All whitespace tokens of the corpus in record order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.records.iter().flat_map(LyricRecord::tokens)
    }

    pub fn into_records(self) -> Vec<LyricRecord> {
        self.records
    }
}

fn check_record(r: &LyricRecord) -> std::result::Result<(), String> {
    if r.id.is_empty() {
        return Err("empty id".into());
    }
    if r.palo.is_empty() {
        return Err(format!("record {:?} has an empty palo", r.id));
    }
    if r.text.trim().is_empty() {
        return Err(format!("record {:?} has empty text", r.id));
    }
    Ok(())
}

pub fn load_corpus(path: &Path, format: Format) -> Result<Corpus> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (records, lines) = match format {
        Format::Jsonl => read_jsonl(BufReader::new(file), path)?,
        Format::Csv => read_csv(file)?,
    };
    build_with_lines(records, &lines)
}

/// Parses JSONL from any reader. Line numbers in errors are 1-based.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Corpus> {
    let (records, lines) = read_jsonl(reader, Path::new("<reader>"))?;
    build_with_lines(records, &lines)
}

pub fn parse_csv<R: Read>(reader: R) -> Result<Corpus> {
    let (records, lines) = read_csv(reader)?;
    build_with_lines(records, &lines)
}

fn build_with_lines(records: Vec<LyricRecord>, lines: &[usize]) -> Result<Corpus> {
    Corpus::new(records).map_err(|e| match e {
        Error::DuplicateId { id, first, second } => Error::DuplicateId {
            id,
            first: lines[first - 1],
            second: lines[second - 1],
        },
        Error::InvalidRecord { position, message } => Error::Format {
            line: lines[position - 1],
            message,
        },
        other => other,
    })
}

fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<(Vec<LyricRecord>, Vec<usize>)> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let object: Map<String, Value> = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record_from_object(object).map_err(|message| Error::Format {
            line: line_no,
            message,
        })?);
        lines.push(line_no);
    }
    Ok((records, lines))
}

fn record_from_object(mut object: Map<String, Value>) -> std::result::Result<LyricRecord, String> {
    let mut take = |key: &str| match object.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(format!("key {key:?} must be a string, got {other}")),
        None => Err(format!("missing key {key:?}")),
    };
    let id = take("id")?;
    let palo = take("palo")?;
    let text = take("text")?;
    let metadata = object
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            (k, v)
        })
        .collect();
    Ok(LyricRecord {
        id,
        text,
        palo,
        metadata,
    })
}

fn read_csv<R: Read>(reader: R) -> Result<(Vec<LyricRecord>, Vec<usize>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Format {
            line: 1,
            message: format!("header lacks column {name:?}"),
        })
    };
    let (id_col, palo_col, text_col) = (column("id")?, column("palo")?, column("text")?);

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Format {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or_default().to_string();
        let metadata = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![id_col, palo_col, text_col].contains(i))
            .map(|(i, h)| (h.to_string(), field(i)))
            .collect();
        records.push(LyricRecord {
            id: field(id_col),
            text: field(text_col),
            palo: field(palo_col),
            metadata,
        });
        lines.push(line);
    }
    Ok((records, lines))
}

/// Writes the corpus in the canonical JSONL schema.
pub fn write_jsonl<W: Write>(corpus: &Corpus, mut writer: W) -> std::io::Result<()> {
    for r in corpus.records() {
        let mut object = Map::new();
        for (k, v) in &r.metadata {
            object.insert(k.clone(), Value::String(v.clone()));
        }
        object.insert("id".into(), Value::String(r.id.clone()));
        object.insert("palo".into(), Value::String(r.palo.clone()));
        object.insert("text".into(), Value::String(r.text.clone()));
        serde_json::to_writer(&mut writer, &object)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Keeps the records of every palo with at least `min_lyrics` records.
pub fn filter_top_palos(corpus: &Corpus, min_lyrics: usize) -> Result<Corpus> {
    if min_lyrics == 0 {
        return Err(Error::InvalidConfig("min_lyrics must be at least 1".into()));
    }
    let counts = corpus.palo_counts();
    let kept: Vec<LyricRecord> = corpus
        .records()
        .iter()
        .filter(|r| counts[r.palo.as_str()] >= min_lyrics)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Corpus::derived(kept))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Training records for a stratum of `n` records: round half up, then
    /// clamp to `[1, n - 1]`.
    pub fn train_count(&self, n: usize) -> usize {
        let raw = (self.train_fraction * n as f64 + 0.5 + 1e-9).floor() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Splits every palo independently: shuffle its records with a generator
/// seeded from `(spec.seed, palo)`, then cut. Both halves keep corpus order.
pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    let mut in_train = vec![false; corpus.len()];
    for (palo, positions) in corpus.palo_index() {
        if positions.len() < 2 {
            return Err(Error::StratumTooSmall {
                palo: palo.clone(),
                count: positions.len(),
            });
        }
        let mut shuffled = positions.clone();
        shuffled.shuffle(&mut seed::rng(spec.seed));
        for &i in &shuffled[..spec.train_count(positions.len())] {
            in_train[i] = true;
        }
    }
    let (train, validation): (Vec<_>, Vec<_>) = corpus
        .records()
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    let strip = |v: Vec<(LyricRecord, bool)>| Corpus::derived(v.into_iter().map(|(r, _)| r).collect());
    Ok((strip(train), strip(validation)))
}

/// One synthetic record per palo: its lyrics joined by newlines in corpus
/// order, with id `__agg__<palo>`.
pub fn concat_by_palo(corpus: &Corpus) -> BTreeMap<String, LyricRecord> {
    corpus
        .palo_index()
        .iter()
        .map(|(palo, positions)| {
            let text = positions
                .iter()
                .map(|&i| corpus.records()[i].text.as_str())
                .collect::<Vec<_>>()
                .join("\n");
            let record = LyricRecord::new(format!("{AGGREGATE_PREFIX}{palo}"), palo.clone(), text);
            (palo.clone(), record)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, palo: &str, text: &str) -> LyricRecord {
        LyricRecord::new(id, palo, text)
    }

    fn corpus_of(spec: &[(&str, usize)]) -> Corpus {
        let mut records = Vec::new();
        for (palo, n) in spec {
            for i in 0..*n {
                records.push(rec(&format!("{palo}{i}"), palo, &format!("w{i} x")));
            }
        }
        Corpus::new(records).unwrap()
    }

    #[test]
    fn loads_three_jsonl_records() {
        let data = r#"{"id":"1","palo":"A","text":"a b"}
{"id":"2","palo":"B","text":"c","year":1999}

{"id":"3","palo":"A","text":"d","singer":"X"}
"#;
        let c = parse_jsonl(data.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.palo_index().len(), 2);
        assert_eq!(c.records()[1].metadata["year"], "1999");
        assert_eq!(c.records()[2].metadata["singer"], "X");
        assert_eq!(c.palo_index()["A"], vec![0, 2]);
    }

    #[test]
    fn duplicate_id_cites_both_lines() {
        let data = "{\"id\":\"x0\",\"palo\":\"A\",\"text\":\"a\"}\n\
                    {\"id\":\"x1\",\"palo\":\"A\",\"text\":\"a\"}\n\
                    {\"id\":\"x2\",\"palo\":\"A\",\"text\":\"a\"}\n\
                    {\"id\":\"x3\",\"palo\":\"A\",\"text\":\"a\"}\n\
                    {\"id\":\"x1\",\"palo\":\"B\",\"text\":\"b\"}\n";
        match parse_jsonl(data.as_bytes()) {
            Err(Error::DuplicateId { id, first, second }) => {
                assert_eq!((id.as_str(), first, second), ("x1", 2, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let data = "{\"id\":\"1\",\"palo\":\"A\",\"text\":\"a\"}\n{\"id\":\"2\",\"palo\":\"A\"}\n";
        assert!(matches!(parse_jsonl(data.as_bytes()), Err(Error::Format { line: 2, .. })));
        let data = "{\"id\":\"1\",\"palo\":\"A\",\"text\":\"a\"}\nnot json\n";
        assert!(matches!(parse_jsonl(data.as_bytes()), Err(Error::Format { line: 2, .. })));
        let data = "{\"id\":\"1\",\"palo\":\"A\",\"text\":\"   \"}\n";
        assert!(matches!(parse_jsonl(data.as_bytes()), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(parse_jsonl("\n\n".as_bytes()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_corpus(Path::new("/nonexistent/corpus.jsonl"), Format::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn csv_needs_header_and_keeps_extra_columns() {
        let data = "id,palo,text,title\n1,A,\"a, b\",T1\n2,B,c,T2\n";
        let c = parse_csv(data.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.records()[0].text, "a, b");
        assert_eq!(c.records()[1].metadata["title"], "T2");

        let bad = "id,text\n1,a\n";
        assert!(matches!(parse_csv(bad.as_bytes()), Err(Error::Format { line: 1, .. })));

        let dup = "id,palo,text\n1,A,a\n1,A,b\n";
        assert!(matches!(
            parse_csv(dup.as_bytes()),
            Err(Error::DuplicateId { first: 2, second: 3, .. })
        ));
    }

    #[test]
    fn filter_keeps_large_palos_in_order() {
        let c = Corpus::new(vec![
            rec("1", "A", "a"),
            rec("2", "B", "b"),
            rec("3", "A", "a"),
            rec("4", "A", "a"),
        ])
        .unwrap();
        let f = filter_top_palos(&c, 2).unwrap();
        let ids: Vec<_> = f.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["1", "3", "4"]);
        assert_eq!(filter_top_palos(&c, 1).unwrap(), c);
        assert!(matches!(filter_top_palos(&c, 4), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn split_counts_follow_rounding_rule() {
        let spec = SplitSpec::new(0.85, 1).unwrap();
        assert_eq!(spec.train_count(20), 17);
        assert_eq!(spec.train_count(2), 1);
        assert_eq!(spec.train_count(3), 2);
        let half = SplitSpec::new(0.5, 1).unwrap();
        assert_eq!(half.train_count(3), 2);
        assert_eq!(half.train_count(5), 3);
        let tiny = SplitSpec::new(0.01, 1).unwrap();
        assert_eq!(tiny.train_count(10), 1);
        assert!(SplitSpec::new(1.0, 0).is_err());
        assert!(SplitSpec::new(0.0, 0).is_err());
    }

    #[test]
    fn split_twenty_records() {
        let c = corpus_of(&[("A", 20)]);
        let (tr, va) = stratified_split(&c, &SplitSpec::new(0.85, 3).unwrap()).unwrap();
        assert_eq!((tr.len(), va.len()), (17, 3));
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let c = corpus_of(&[("A", 30), ("B", 12), ("C", 5)]);
        let s = SplitSpec::new(0.85, 42).unwrap();
        let a = stratified_split(&c, &s).unwrap();
        let b = stratified_split(&c, &s).unwrap();
        assert_eq!(a, b);
        let other = stratified_split(&c, &s.with_seed(43)).unwrap();
        assert_ne!(a.0, other.0);
    }

    #[test]
    fn split_rejects_singleton_stratum() {
        let c = corpus_of(&[("A", 5), ("B", 1)]);
        match stratified_split(&c, &SplitSpec::new(0.85, 0).unwrap()) {
            Err(Error::StratumTooSmall { palo, count }) => assert_eq!((palo.as_str(), count), ("B", 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn concat_joins_with_newlines() {
        let c = Corpus::new(vec![rec("1", "A", "a b"), rec("2", "B", "z"), rec("3", "A", "c")]).unwrap();
        let agg = concat_by_palo(&c);
        assert_eq!(agg["A"].text, "a b\nc");
        assert_eq!(agg["A"].id, "__agg__A");
        assert_eq!(agg["B"].text, "z");
    }

    #[test]
    fn aggregate_token_count_is_additive() {
        // Brute-force: count characters-delimited words by hand-rolled scan.
        let texts = ["uno  dos", " tres\tcuatro cinco ", "seis", "siete ocho\nnueve", "diez"];
        let records = texts
            .iter()
            .enumerate()
            .map(|(i, t)| rec(&i.to_string(), "A", t))
            .collect();
        let c = Corpus::new(records).unwrap();
        let manual: usize = texts
            .iter()
            .map(|t| {
                let mut n = 0;
                let mut in_word = false;
                for ch in t.chars() {
                    if ch.is_whitespace() {
                        in_word = false;
                    } else if !in_word {
                        in_word = true;
                        n += 1;
                    }
                }
                n
            })
            .sum();
        assert_eq!(manual, 10);
        assert_eq!(concat_by_palo(&c)["A"].tokens().count(), manual);
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        prop::collection::vec((0usize..4, "[a-z ]{1,12}[a-z]", prop::option::of("[a-zA-Z0-9 ]{0,6}")), 1..40)
            .prop_map(|rows| {
                let records = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (p, text, title))| {
                        let mut r = rec(&format!("id{i}"), &format!("P{p}"), &text);
                        if let Some(t) = title {
                            r.metadata.insert("title".into(), t);
                        }
                        r
                    })
                    .collect();
                Corpus::new(records).unwrap()
            })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(c in arb_corpus()) {
            let mut buf = Vec::new();
            write_jsonl(&c, &mut buf).unwrap();
            prop_assert_eq!(parse_jsonl(buf.as_slice()).unwrap(), c);
        }

        #[test]
        fn split_partitions_and_respects_fraction(
            sizes in prop::collection::vec(2usize..40, 1..5),
            frac in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let spec_sizes: Vec<(String, usize)> =
                sizes.iter().enumerate().map(|(i, n)| (format!("P{i}"), *n)).collect();
            let refs: Vec<(&str, usize)> = spec_sizes.iter().map(|(p, n)| (p.as_str(), *n)).collect();
            let c = corpus_of(&refs);
            let spec = SplitSpec::new(frac, seed).unwrap();
            let (tr, va) = stratified_split(&c, &spec).unwrap();
            prop_assert_eq!(tr.len() + va.len(), c.len());
            let mut ids: Vec<_> = tr.records().iter().chain(va.records()).map(|r| r.id.clone()).collect();
            ids.sort();
            let mut orig: Vec<_> = c.records().iter().map(|r| r.id.clone()).collect();
            orig.sort();
            prop_assert_eq!(ids, orig);
            for (palo, n) in c.palo_counts() {
                let k = tr.records_of(palo).count();
                let ratio = k as f64 / n as f64;
                let slack = 1.0 / n as f64 + 1e-12;
                prop_assert!(ratio >= frac - slack && ratio <= frac + slack, "{palo}: {k}/{n} vs {frac}");
                prop_assert!(k >= 1 && k < n);
            }
        }
    }
}
