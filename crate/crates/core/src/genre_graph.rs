//! Lexical distances between palos and the structures built on them:
//! agglomerative clustering, the complete weighted network with closeness
//! centrality, and its minimum spanning tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{concat_by_palo, Corpus};
use crate::error::{Error, Result};
use crate::vectorize::{build_vocabulary, tfidf, SparseRow};

const NORM_TOLERANCE: f64 = 1e-6;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    /// Checks squareness, a zero diagonal, symmetry and the `[0, 1]` range.
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig("distance matrix must be square and match its labels".into()));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(Error::InvalidConfig(format!("nonzero diagonal at {}", labels[i])));
            }
            for j in 0..n {
                let v = values[i][j];
                if !(0.0..=1.0).contains(&v) || (v - values[j][i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidConfig(format!(
                        "entry ({}, {}) = {v} is out of range or asymmetric",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// One unit-norm TF-IDF vector per palo: each palo's lyrics are joined into a
/// single document and weighted against the other palo documents.
pub fn palo_vectors(corpus: &Corpus) -> Result<BTreeMap<String, SparseRow>> {
    let docs = Corpus::derived(concat_by_palo(corpus).into_values().collect());
    let vocab = build_vocabulary(&docs)?;
    let matrix = tfidf(&docs, &vocab)?;
    Ok(docs.records().iter().map(|r| r.palo.clone()).zip(matrix.rows).collect())
}

/// Cosine distance `1 - u·v` between every pair of unit vectors.
pub fn distance_matrix(vectors: &BTreeMap<String, SparseRow>) -> Result<DistanceMatrix> {
    for (label, v) in vectors {
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Norm {
                label: label.clone(),
                norm,
            });
        }
    }
    let labels: Vec<String> = vectors.keys().cloned().collect();
    let rows: Vec<&SparseRow> = vectors.values().collect();
    let n = rows.len();
    let mut values = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = if rows[i] == rows[j] {
                0.0
            } else {
                (1.0 - rows[i].dot(rows[j])).clamp(0.0, 1.0)
            };
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    DistanceMatrix::new(labels, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Self::Average),
            "single" => Ok(Self::Single),
            "complete" => Ok(Self::Complete),
            other => Err(Error::InvalidConfig(format!("unknown linkage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub id: usize,
    pub size: usize,
}

/// Leaves are `0..n` in label order; the `k`-th merge creates cluster `n + k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Leaf labels under cluster `id`, sorted.
    pub fn members(&self, id: usize) -> Vec<&str> {
        let n = self.labels.len();
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(c) = stack.pop() {
            if c < n {
                out.push(self.labels[c].as_str());
            } else {
                let m = &self.merges[c - n];
                stack.push(m.a);
                stack.push(m.b);
            }
        }
        out.sort_unstable();
        out
    }
}

fn linkage_distance(m: &DistanceMatrix, a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| m.get(i, j)));
    match linkage {
        Linkage::Average => pairs.sum::<f64>() / (a.len() * b.len()) as f64,
        Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
        Linkage::Complete => pairs.fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Agglomerative clustering. Each step merges the closest pair of clusters;
/// ties go to the pair with the smallest ids.
pub fn hierarchical_cluster(m: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidConfig("clustering needs at least two palos".into()));
    }
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n - 1);
    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0, 1);
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let d = linkage_distance(m, &active[x].1, &active[y].1, linkage);
                if d < best.0 {
                    best = (d, x, y);
                }
            }
        }
        let (distance, x, y) = best;
        let (b, mut right) = active.remove(y);
        let (a, left) = &mut active[x];
        let a = *a;
        left.append(&mut right);
        let id = n + merges.len();
        merges.push(Merge {
            a,
            b,
            distance,
            id,
            size: left.len(),
        });
        active[x].0 = id;
        // Keep the list ordered by id so scanning order is the tie-break.
        let moved = active.remove(x);
        active.push(moved);
    }
    Ok(Dendrogram {
        labels: m.labels.clone(),
        linkage,
        merges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Complete,
    Mst,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenreGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub kind: GraphKind,
}

impl GenreGraph {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.u == node || e.v == node).count()
    }
}

/// Every pair `u < v`, in row-major order.
pub fn complete_graph(m: &DistanceMatrix) -> GenreGraph {
    let n = m.len();
    let edges = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .map(|(u, v)| Edge { u, v, weight: m.get(u, v) })
        .collect();
    GenreGraph {
        nodes: m.labels.clone(),
        edges,
        kind: GraphKind::Complete,
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Kruskal over an arbitrary edge list; ties are broken by `(u, v)`.
pub fn spanning_tree(nodes: &[String], edges: &[Edge]) -> Result<GenreGraph> {
    let mut order: Vec<&Edge> = edges.iter().collect();
    order.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then((a.u.min(a.v), a.u.max(a.v)).cmp(&(b.u.min(b.v), b.u.max(b.v))))
    });
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    let mut tree = Vec::with_capacity(nodes.len().saturating_sub(1));
    for e in order {
        let (ru, rv) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if ru != rv {
            parent[ru] = rv;
            tree.push(e.clone());
        }
    }
    if tree.len() + 1 != nodes.len() {
        return Err(Error::Degenerate("graph is not connected".into()));
    }
    Ok(GenreGraph {
        nodes: nodes.to_vec(),
        edges: tree,
        kind: GraphKind::Mst,
    })
}

pub fn minimum_spanning_tree(m: &DistanceMatrix) -> Result<GenreGraph> {
    if m.len() < 2 {
        return Err(Error::InvalidConfig("a spanning tree needs at least two palos".into()));
    }
    spanning_tree(&m.labels, &complete_graph(m).edges)
}

/// `(n - 1) / Σ_v d(u, v)` over direct distances.
pub fn closeness_centrality(m: &DistanceMatrix) -> Result<BTreeMap<String, f64>> {
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidConfig("centrality needs at least two palos".into()));
    }
    let mut out = BTreeMap::new();
    for u in 0..n {
        let mut total = 0.0;
        for v in (0..n).filter(|&v| v != u) {
            let d = m.get(u, v);
            if d == 0.0 {
                return Err(Error::Degenerate(format!(
                    "{} and {} are at distance zero",
                    m.labels[u], m.labels[v]
                )));
            }
            total += d;
        }
        out.insert(m.labels[u].clone(), (n - 1) as f64 / total);
    }
    Ok(out)
}

fn quote(label: &str) -> String {
    format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz text: nodes in label order with their closeness centrality (left
/// out when undefined), then edges in `(u, v)` order with `weight` set to the
/// distance.
pub fn export_dot(g: &GenreGraph, m: &DistanceMatrix) -> String {
    let centrality = closeness_centrality(m).ok();
    let name = match g.kind {
        GraphKind::Complete => "network",
        GraphKind::Mst => "mst",
    };
    let mut out = format!("graph {name} {{\n");
    for node in &g.nodes {
        match centrality.as_ref().and_then(|c| c.get(node)) {
            Some(c) => writeln!(out, "  {} [centrality={c}];", quote(node)),
            None => writeln!(out, "  {};", quote(node)),
        }
        .expect("writing to a string");
    }
    let mut edges: Vec<(usize, usize, f64)> = g.edges.iter().map(|e| (e.u.min(e.v), e.u.max(e.v), e.weight)).collect();
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for (u, v, w) in edges {
        writeln!(out, "  {} -- {} [weight={w}];", quote(&g.nodes[u]), quote(&g.nodes[v])).expect("writing to a string");
    }
    out.push_str("}\n");
    out
}
