//! Undirected weighted similarity graphs over trajectories or segments.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::format::sig12;
use crate::network::SegmentIdx;
use crate::vectorizer::{cosine, Vectorizer};

/// Similarities at or below this value are treated as zero.
pub const SIMILARITY_EPSILON: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) has non-positive or non-finite weight {2}")]
    InvalidWeight(usize, usize, f64),
    #[error("edge ({0}, {1}) given twice")]
    DuplicateEdge(usize, usize),
    #[error("node index {0} out of range")]
    OutOfRange(usize),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
}

/// Which entities a similarity graph is built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Trajectory,
    Segment,
}

/// Segment graph construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    /// Edge iff the segments share a trajectory with positive similarity.
    Loose,
    /// Loose, and additionally the segments must share an endpoint.
    Strict,
}

impl std::str::FromStr for SegmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loose" => Ok(Self::Loose),
            "strict" => Ok(Self::Strict),
            other => Err(format!("unknown mode `{other}` (expected loose|strict)")),
        }
    }
}

/// How candidate pairs are enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BuildStrategy {
    /// Only pairs sharing a feature, found through the inverted index.
    #[default]
    Indexed,
    /// Every unordered pair; the reference construction.
    AllPairs,
}

/// Undirected weighted graph with no self-loops and positive weights.
///
/// Adjacency lists are sorted by neighbor index. `two_m` is the sum of the
/// weighted degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
    two_m: f64,
    edge_count: usize,
}

impl SimilarityGraph {
    /// Builds a graph from node ids and `(a, b, weight)` triples.
    pub fn from_edges<I>(ids: Vec<String>, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = ids.len();
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(id.clone()));
            }
        }
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (a, b, w) in edges {
            if a >= n {
                return Err(GraphError::OutOfRange(a));
            }
            if b >= n {
                return Err(GraphError::OutOfRange(b));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(GraphError::InvalidWeight(a, b, w));
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        let mut edge_count = 0;
        for (a, list) in adjacency.iter_mut().enumerate() {
            list.sort_by_key(|&(b, _)| b);
            if let Some(pair) = list.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(GraphError::DuplicateEdge(a.min(pair[0].0), a.max(pair[0].0)));
            }
            edge_count += list.len();
        }
        Ok(Self::assemble(ids, index, adjacency, edge_count / 2))
    }

    /// Graph with `n` nodes named `0..n` and no edges.
    pub fn with_indices(n: usize) -> Self {
        Self::from_edges((0..n).map(|i| i.to_string()).collect(), std::iter::empty())
            .expect("edgeless graph is valid")
    }

    fn assemble(
        ids: Vec<String>,
        index: HashMap<String, usize>,
        adjacency: Vec<Vec<(usize, f64)>>,
        edge_count: usize,
    ) -> Self {
        let degrees: Vec<f64> = adjacency
            .iter()
            .map(|l| l.iter().map(|&(_, w)| w).sum())
            .collect();
        let two_m = degrees.iter().sum();
        Self {
            ids,
            index,
            adjacency,
            degrees,
            two_m,
            edge_count,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Weighted degree d_i.
    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Σ d_i, twice the total edge weight.
    pub fn two_m(&self) -> f64 {
        self.two_m
    }

    /// m, the total edge weight.
    pub fn total_weight(&self) -> f64 {
        self.two_m / 2.0
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        let list = &self.adjacency[a];
        list.binary_search_by_key(&b, |&(x, _)| x)
            .map_or(0.0, |i| list[i].1)
    }

    /// Edges `(a, b, w)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, list)| {
            list.iter()
                .filter(move |&&(b, _)| b > a)
                .map(move |&(b, w)| (a, b, w))
        })
    }

    /// Subgraph on `members` (indices into this graph) keeping only edges
    /// whose endpoints are both members. Node `k` of the result is
    /// `members[k]`.
    pub fn induced_subgraph_idx(&self, members: &[usize]) -> Result<Self, GraphError> {
        let mut local = HashMap::with_capacity(members.len());
        for (k, &m) in members.iter().enumerate() {
            if m >= self.node_count() {
                return Err(GraphError::OutOfRange(m));
            }
            if local.insert(m, k).is_some() {
                return Err(GraphError::DuplicateNode(self.ids[m].clone()));
            }
        }
        let ids: Vec<String> = members.iter().map(|&m| self.ids[m].clone()).collect();
        let index = ids.iter().cloned().zip(0..).collect();
        let mut edge_count = 0;
        let adjacency: Vec<Vec<(usize, f64)>> = members
            .iter()
            .map(|&m| {
                let mut list: Vec<(usize, f64)> = self.adjacency[m]
                    .iter()
                    .filter_map(|&(b, w)| local.get(&b).map(|&k| (k, w)))
                    .collect();
                list.sort_by_key(|&(k, _)| k);
                edge_count += list.len();
                list
            })
            .collect();
        Ok(Self::assemble(ids, index, adjacency, edge_count / 2))
    }

    /// Subgraph on the nodes named by `members`.
    pub fn induced_subgraph<S: AsRef<str>>(&self, members: &[S]) -> Result<Self, GraphError> {
        let idx = members
            .iter()
            .map(|m| {
                self.index_of(m.as_ref())
                    .ok_or_else(|| GraphError::UnknownNode(m.as_ref().to_owned()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.induced_subgraph_idx(&idx)
    }

    /// Same topology with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let adjacency = self
            .adjacency
            .iter()
            .map(|l| l.iter().map(|&(b, w)| (b, w * factor)).collect())
            .collect();
        Self::assemble(self.ids.clone(), self.index.clone(), adjacency, self.edge_count)
    }

    /// Edge list CSV `node_a,node_b,weight`.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("node_a,node_b,weight\n");
        for (a, b, w) in self.edges() {
            let _ = writeln!(out, "{},{},{}", self.ids[a], self.ids[b], sig12(w));
        }
        out
    }

    /// Graphviz DOT description; isolated nodes are listed explicitly.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph similarity {\n");
        for (i, id) in self.ids.iter().enumerate() {
            if self.adjacency[i].is_empty() {
                let _ = writeln!(out, "  \"{}\";", escape_dot(id));
            }
        }
        for (a, b, w) in self.edges() {
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\" [weight={}];",
                escape_dot(&self.ids[a]),
                escape_dot(&self.ids[b]),
                sig12(w)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape_dot(id: &str) -> String {
    id.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Node set of a segment graph: traveled segments sorted by id.
fn segment_nodes(corpus: &Corpus) -> Vec<SegmentIdx> {
    let net = corpus.network();
    let mut nodes: Vec<SegmentIdx> = corpus.traveled_segments().collect();
    nodes.sort_by(|&a, &b| net.segment(a).id.cmp(&net.segment(b).id));
    nodes
}

/// Pairs `(i, j)`, `i < j`, of entity indices sharing at least one feature.
///
/// Trajectory indices are corpus indices; segment indices are positions in
/// the segment-graph node order (traveled segments sorted by id).
pub fn candidate_pairs_idx(corpus: &Corpus, kind: EntityKind) -> Vec<(usize, usize)> {
    match kind {
        EntityKind::Trajectory => (0..corpus.len())
            .flat_map(|i| {
                trajectory_neighbors(corpus, i)
                    .into_iter()
                    .map(move |j| (i, j))
            })
            .collect(),
        EntityKind::Segment => {
            let nodes = segment_nodes(corpus);
            let position = node_positions(corpus, &nodes);
            (0..nodes.len())
                .flat_map(|i| {
                    segment_neighbors(corpus, &nodes, &position, i)
                        .into_iter()
                        .map(move |j| (i, j))
                })
                .collect()
        }
    }
}

/// Unordered id pairs sharing at least one feature, each yielded once.
pub fn candidate_pairs(corpus: &Corpus, kind: EntityKind) -> Vec<(String, String)> {
    let pairs = candidate_pairs_idx(corpus, kind);
    match kind {
        EntityKind::Trajectory => pairs
            .into_iter()
            .map(|(i, j)| {
                (
                    corpus.trajectory(i).id.clone(),
                    corpus.trajectory(j).id.clone(),
                )
            })
            .collect(),
        EntityKind::Segment => {
            let nodes = segment_nodes(corpus);
            let net = corpus.network();
            pairs
                .into_iter()
                .map(|(i, j)| {
                    (
                        net.segment(nodes[i]).id.clone(),
                        net.segment(nodes[j]).id.clone(),
                    )
                })
                .collect()
        }
    }
}

fn node_positions(corpus: &Corpus, nodes: &[SegmentIdx]) -> Vec<usize> {
    let mut position = vec![usize::MAX; corpus.network().segment_count()];
    for (k, &s) in nodes.iter().enumerate() {
        position[s] = k;
    }
    position
}

fn trajectory_neighbors(corpus: &Corpus, i: usize) -> Vec<usize> {
    let mut out: Vec<usize> = corpus
        .segment_counts(i)
        .iter()
        .flat_map(|&(s, _)| corpus.postings(s).iter().map(|&(t, _)| t))
        .filter(|&t| t > i)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn segment_neighbors(
    corpus: &Corpus,
    nodes: &[SegmentIdx],
    position: &[usize],
    i: usize,
) -> Vec<usize> {
    let mut out: Vec<usize> = corpus
        .postings(nodes[i])
        .iter()
        .flat_map(|&(t, _)| corpus.segment_counts(t).iter().map(|&(s, _)| position[s]))
        .filter(|&k| k > i)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Trajectory similarity graph via the inverted index.
pub fn build_trajectory_graph(corpus: &Corpus) -> SimilarityGraph {
    build_trajectory_graph_with(corpus, BuildStrategy::Indexed)
}

pub fn build_trajectory_graph_with(corpus: &Corpus, strategy: BuildStrategy) -> SimilarityGraph {
    let vectors = Vectorizer::new(corpus);
    let n = corpus.len();
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let candidates: Vec<usize> = match strategy {
                BuildStrategy::Indexed => trajectory_neighbors(corpus, i),
                BuildStrategy::AllPairs => (i + 1..n).collect(),
            };
            let vi = vectors.trajectory_vector_idx(i);
            candidates
                .into_iter()
                .filter_map(|j| {
                    let w = cosine(vi, vectors.trajectory_vector_idx(j));
                    (w > SIMILARITY_EPSILON).then_some((i, j, w))
                })
                .collect()
        })
        .collect();
    let ids = corpus.trajectories().iter().map(|t| t.id.clone()).collect();
    SimilarityGraph::from_edges(ids, rows.into_iter().flatten())
        .expect("similarity edges are unique, positive and loop-free")
}

/// Segment similarity graph in loose or strict mode.
pub fn build_segment_graph(corpus: &Corpus, mode: SegmentMode) -> SimilarityGraph {
    build_segment_graph_with(corpus, mode, BuildStrategy::Indexed)
}

pub fn build_segment_graph_with(
    corpus: &Corpus,
    mode: SegmentMode,
    strategy: BuildStrategy,
) -> SimilarityGraph {
    let vectors = Vectorizer::new(corpus);
    let net = corpus.network();
    let nodes = segment_nodes(corpus);
    let position = node_positions(corpus, &nodes);
    let n = nodes.len();
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let candidates: Vec<usize> = match strategy {
                BuildStrategy::Indexed => segment_neighbors(corpus, &nodes, &position, i),
                BuildStrategy::AllPairs => (i + 1..n).collect(),
            };
            let vi = vectors
                .segment_vector_idx(nodes[i])
                .expect("graph nodes are traveled segments");
            candidates
                .into_iter()
                .filter(|&j| mode == SegmentMode::Loose || net.are_connected(nodes[i], nodes[j]))
                .filter_map(|j| {
                    let vj = vectors
                        .segment_vector_idx(nodes[j])
                        .expect("graph nodes are traveled segments");
                    let w = cosine(vi, vj);
                    (w > SIMILARITY_EPSILON).then_some((i, j, w))
                })
                .collect()
        })
        .collect();
    let ids = nodes.iter().map(|&s| net.segment(s).id.clone()).collect();
    SimilarityGraph::from_edges(ids, rows.into_iter().flatten())
        .expect("similarity edges are unique, positive and loop-free")
}
