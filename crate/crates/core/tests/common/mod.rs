//! Shared fixtures and brute-force oracles for the integration tests.
//!
//! The oracles work on plain strings and nested loops and never call into the
//! library's statistics, so they can be checked against it.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajcluster::datagen::{self, GenerationSpec, GroundTruth};
use trajcluster::{Corpus, RoadNetwork, Segment, SimilarityGraph};

pub const HAND_SEGMENTS: [(&str, &str, &str, f64); 4] = [
    ("s1", "A", "B", 100.0),
    ("s2", "B", "C", 100.0),
    ("s3", "C", "D", 100.0),
    ("s4", "B", "D", 200.0),
];

pub const HAND_TRAJECTORIES: [(&str, &[&str]); 3] = [
    ("T1", &["s1", "s2"]),
    ("T2", &["s1", "s2", "s3"]),
    ("T3", &["s1", "s4"]),
];

pub fn network_of(segments: &[(&str, &str, &str, f64)]) -> RoadNetwork {
    RoadNetwork::from_segments(
        segments
            .iter()
            .map(|&(id, from, to, length)| Segment {
                id: id.into(),
                from: from.into(),
                to: to.into(),
                length,
            })
            .collect(),
    )
    .unwrap()
}

pub fn hand_corpus() -> Corpus {
    let net = Arc::new(network_of(&HAND_SEGMENTS));
    Corpus::new(
        net,
        HAND_TRAJECTORIES
            .iter()
            .map(|(id, segs)| (id.to_string(), segs.to_vec())),
    )
    .unwrap()
}

/// Raw data the formula oracle reads: segment lengths, network size and
/// trajectories as id lists.
pub struct RawCorpus {
    pub lengths: HashMap<String, f64>,
    pub endpoints: HashMap<String, (String, String)>,
    pub network_size: usize,
    pub trajectories: Vec<(String, Vec<String>)>,
}

impl RawCorpus {
    pub fn hand() -> Self {
        Self {
            lengths: HAND_SEGMENTS.iter().map(|s| (s.0.to_string(), s.3)).collect(),
            endpoints: HAND_SEGMENTS
                .iter()
                .map(|s| (s.0.to_string(), (s.1.to_string(), s.2.to_string())))
                .collect(),
            network_size: HAND_SEGMENTS.len(),
            trajectories: HAND_TRAJECTORIES
                .iter()
                .map(|(id, segs)| (id.to_string(), segs.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        let net = corpus.network();
        Self {
            lengths: net.segments().iter().map(|s| (s.id.clone(), s.length)).collect(),
            endpoints: net
                .segments()
                .iter()
                .map(|s| (s.id.clone(), (s.from.clone(), s.to.clone())))
                .collect(),
            network_size: net.segment_count(),
            trajectories: corpus
                .trajectories()
                .iter()
                .map(|t| {
                    (
                        t.id.clone(),
                        t.segments.iter().map(|&s| net.segment(s).id.clone()).collect(),
                    )
                })
                .collect(),
        }
    }

    fn path(&self, t: &str) -> &[String] {
        &self.trajectories.iter().find(|(id, _)| id == t).unwrap().1
    }

    fn count(&self, e: &str, t: &str) -> f64 {
        self.path(t).iter().filter(|s| *s == e).count() as f64
    }

    pub fn ssf(&self, e: &str, t: &str) -> f64 {
        let path = self.path(t);
        let total: f64 = path.iter().map(|s| self.lengths[s]).sum();
        self.count(e, t) * self.lengths[e] / total
    }

    pub fn itf(&self, e: &str) -> f64 {
        let df = self
            .trajectories
            .iter()
            .filter(|(_, p)| p.iter().any(|s| s == e))
            .count();
        (self.trajectories.len() as f64 / df as f64).ln()
    }

    pub fn omega(&self, e: &str, t: &str) -> f64 {
        self.ssf(e, t) * self.itf(e)
    }

    pub fn segment_weight(&self, t: &str, e: &str) -> f64 {
        let total: f64 = self.trajectories.iter().map(|(id, _)| self.count(e, id)).sum();
        let distinct: BTreeSet<&String> = self.path(t).iter().collect();
        self.count(e, t) / total * (self.network_size as f64 / distinct.len() as f64).ln()
    }

    pub fn traveled(&self) -> BTreeSet<String> {
        self.trajectories.iter().flat_map(|(_, p)| p.iter().cloned()).collect()
    }

    pub fn trajectory_vector(&self, t: &str) -> BTreeMap<String, f64> {
        self.traveled().into_iter().map(|e| {
            let w = self.omega(&e, t);
            (e, w)
        }).collect()
    }

    pub fn segment_vector(&self, e: &str) -> BTreeMap<String, f64> {
        self.trajectories
            .iter()
            .map(|(t, _)| (t.clone(), self.segment_weight(t, e)))
            .collect()
    }

    /// Every unordered pair of trajectories with positive cosine.
    pub fn trajectory_edges(&self) -> BTreeMap<(String, String), f64> {
        let ids: Vec<&String> = self.trajectories.iter().map(|(id, _)| id).collect();
        let vecs: Vec<_> = ids.iter().map(|t| self.trajectory_vector(t)).collect();
        pairwise(&ids, &vecs, |_, _| true)
    }

    pub fn segment_edges(&self, strict: bool) -> BTreeMap<(String, String), f64> {
        let traveled: Vec<String> = self.traveled().into_iter().collect();
        let ids: Vec<&String> = traveled.iter().collect();
        let vecs: Vec<_> = ids.iter().map(|e| self.segment_vector(e)).collect();
        pairwise(&ids, &vecs, |a, b| {
            let (fa, ta) = &self.endpoints[a.as_str()];
            let (fb, tb) = &self.endpoints[b.as_str()];
            !strict || ta == fb || tb == fa
        })
    }
}

pub fn oracle_cosine(u: &BTreeMap<String, f64>, v: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = u.iter().map(|(k, x)| x * v.get(k).copied().unwrap_or(0.0)).sum();
    let nu = u.values().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

fn pairwise(
    ids: &[&String],
    vecs: &[BTreeMap<String, f64>],
    keep: impl Fn(&String, &String) -> bool,
) -> BTreeMap<(String, String), f64> {
    let mut out = BTreeMap::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let c = oracle_cosine(&vecs[i], &vecs[j]);
            if c > 1e-12 && keep(ids[i], ids[j]) {
                let (a, b) = if ids[i] < ids[j] { (ids[i], ids[j]) } else { (ids[j], ids[i]) };
                out.insert((a.clone(), b.clone()), c);
            }
        }
    }
    out
}

/// Edges of a library graph keyed by sorted id pairs.
pub fn edge_map(g: &SimilarityGraph) -> BTreeMap<(String, String), f64> {
    g.edges()
        .map(|(a, b, w)| {
            let (x, y) = (g.id(a).to_string(), g.id(b).to_string());
            if x < y {
                ((x, y), w)
            } else {
                ((y, x), w)
            }
        })
        .collect()
}

/// Largest absolute weight difference, or `None` when the edge sets differ.
pub fn max_edge_gap(
    a: &BTreeMap<(String, String), f64>,
    b: &BTreeMap<(String, String), f64>,
) -> Option<f64> {
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return None;
    }
    Some(a.iter().map(|(k, w)| (w - b[k]).abs()).fold(0.0, f64::max))
}

pub fn numbered(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i:02}")).collect()
}

pub fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
    SimilarityGraph::from_edges(numbered(n), edges.to_vec()).unwrap()
}

pub fn two_triangles() -> SimilarityGraph {
    graph(
        6,
        &[
            (0, 1, 1.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
            (3, 4, 1.0),
            (3, 5, 1.0),
            (4, 5, 1.0),
            (2, 3, 1.0),
        ],
    )
}

/// Erdős–Rényi style graph with weights in (0.05, 1].
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SimilarityGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b, rng.gen_range(0.05..=1.0)));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1, 1.0));
    }
    graph(n, &edges)
}

/// `count` disjoint unit-weight cliques of `size` nodes; returns the edge list
/// and the clique of each node.
pub fn cliques(count: usize, size: usize) -> (Vec<(usize, usize, f64)>, Vec<usize>) {
    let mut edges = Vec::new();
    for c in 0..count {
        for a in 0..size {
            for b in a + 1..size {
                edges.push((c * size + a, c * size + b, 1.0));
            }
        }
    }
    let truth = (0..count * size).map(|i| i / size).collect();
    (edges, truth)
}

/// Adds `bridges` edges between distinct cliques, endpoints drawn from `rng`.
pub fn bridged_cliques(
    count: usize,
    size: usize,
    bridges: usize,
    weight: f64,
    rng: &mut ChaCha8Rng,
) -> (SimilarityGraph, Vec<usize>) {
    let (mut edges, truth) = cliques(count, size);
    let n = count * size;
    let mut used = BTreeSet::new();
    while used.len() < bridges {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if truth[a] != truth[b] && used.insert((a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b), weight));
        }
    }
    (graph(n, &edges), truth)
}

/// Modularity by the textbook double sum over ordered node pairs.
pub fn oracle_modularity(g: &SimilarityGraph, labels: &[usize]) -> f64 {
    let n = g.node_count();
    let mut w = vec![vec![0.0; n]; n];
    for (a, b, x) in g.edges() {
        w[a][b] = x;
        w[b][a] = x;
    }
    let d: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = d.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += w[i][j] - d[i] * d[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Calls `f` with every set partition of `0..n` as a restricted growth string.
pub fn for_each_partition(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(labels: &mut Vec<usize>, n: usize, max: usize, f: &mut dyn FnMut(&[usize])) {
        if labels.len() == n {
            f(labels);
            return;
        }
        let next = if labels.is_empty() { 0 } else { max + 1 };
        for l in 0..=next {
            labels.push(l);
            rec(labels, n, max.max(l), f);
            labels.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, 0, &mut f);
}

/// Best modularity over all partitions.
pub fn exhaustive_optimum(g: &SimilarityGraph) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_partition(g.node_count(), |labels| {
        best = best.max(oracle_modularity(g, labels));
    });
    best
}

/// Three edge-disjoint corridors on an 8x8 grid, 20 trajectories each.
pub fn corridor_spec(seed: u64, detour: f64) -> GenerationSpec {
    let mut spec = GenerationSpec::grid(8, 8, seed);
    for y in [1, 4, 7] {
        spec = spec.with_group(
            &datagen::node_name(0, y),
            &datagen::node_name(7, y),
            20,
            detour,
        );
    }
    spec
}

pub fn generate(spec: &GenerationSpec) -> (Corpus, GroundTruth) {
    let net = Arc::new(datagen::generate_network(spec).unwrap());
    datagen::generate_corpus(spec, net).unwrap()
}

/// Random connected walks on a small grid; at most `max_trajectories`.
pub fn random_walk_corpus(seed: u64, max_trajectories: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.gen_range(3..7), rng.gen_range(3..7));
    let net = Arc::new(datagen::generate_network(&GenerationSpec::grid(w, h, seed)).unwrap());
    let count = rng.gen_range(1..=max_trajectories);
    let rows: Vec<(String, Vec<String>)> = (0..count)
        .map(|i| {
            let mut seg = rng.gen_range(0..net.segment_count());
            let mut path = vec![net.segment(seg).id.clone()];
            for _ in 0..rng.gen_range(0..10) {
                let out = net.outgoing(&net.segment(seg).to);
                seg = out[rng.gen_range(0..out.len())];
                path.push(net.segment(seg).id.clone());
            }
            (format!("w{i:03}"), path)
        })
        .collect();
    Corpus::new(net, rows).unwrap()
}

pub fn truth_partition(corpus: &Corpus, truth: &GroundTruth) -> Vec<usize> {
    corpus.trajectories().iter().map(|t| truth[&t.id]).collect()
}
