//! Modularity maximization by greedy agglomeration followed by single-node
//! refinement, alternated until neither phase finds an improvement.
//!
//! Merge phase: starting from the current clusters, repeatedly merge the
//! pair of connected clusters with the largest positive gain
//! `ΔQ = e_cd/m − tot_c·tot_d/(2m²)`.
//!
//! Refinement phase: runs on every coarsening level recorded during the
//! merges, coarsest first, and finally on single nodes. At each level, sweep
//! the blocks and move each one to the neighboring (or an empty) cluster with
//! the largest positive gain
//! `ΔQ = (k_iB − k_iA)/m − k_i·(tot_B − tot_A)/(2m²)`, where `A` is the
//! block's current cluster without it. Sweeps repeat until one makes no move.
//!
//! Gains are compared after rounding to a 1e-12 grid so that equal gains
//! computed through different floating-point paths (for example on a
//! rescaled graph) tie exactly; ties go to the smallest cluster labels.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, modularity, CommunityError, Partition};
use crate::similarity::SimilarityGraph;

const GAIN_GRID: f64 = 1e12;

fn gain_key(gain: f64) -> i64 {
    (gain * GAIN_GRID).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct OptimizerConfig {
    /// Extra runs from singletons with a seeded random sweep order; the best
    /// result over the deterministic run and all restarts is kept.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 2 }
    }
}

/// Finds a high-modularity partition of `graph`, deterministic for `seed`.
///
/// The result never scores below the all-in-one partition (Q = 0), and no
/// single-node move to a neighboring or empty cluster improves it.
pub fn optimize_partition(
    graph: &SimilarityGraph,
    seed: u64,
) -> Result<(Partition, f64), CommunityError> {
    optimize_partition_with(graph, seed, &OptimizerConfig::default())
}

pub fn optimize_partition_with(
    graph: &SimilarityGraph,
    seed: u64,
    config: &OptimizerConfig,
) -> Result<(Partition, f64), CommunityError> {
    if graph.edge_count() == 0 {
        return Err(CommunityError::Edgeless);
    }
    let n = graph.node_count();

    let natural: Vec<usize> = (0..n).collect();
    let mut best = State::singletons(graph).run(&natural);
    let mut best_q = modularity(graph, &best)?;

    for r in 0..config.restarts {
        let mut order = natural.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
        order.shuffle(&mut rng);
        let candidate = State::singletons(graph).run(&order);
        let q = modularity(graph, &candidate)?;
        if gain_key(q - best_q) > 0 {
            best = candidate;
            best_q = q;
        }
    }

    if best_q < 0.0 {
        best = Partition::all_in_one(n);
        best_q = modularity(graph, &best)?;
    }
    Ok((best, best_q))
}

/// Moves a Kernighan–Lin pass may make past its best prefix before giving up.
const KL_PATIENCE: usize = 64;

/// A Kernighan–Lin prefix is kept only if it raises Q by more than this.
const KL_MIN_GAIN: f64 = 1e-10;

/// Levels with more blocks than this get greedy sweeps only.
const KL_MAX_BLOCKS: usize = 256;

/// Gain key, smallest pair first, versions of both clusters.
type MergeCandidate = (i64, Reverse<(usize, usize)>, u32, u32);

/// One refinement level: blocks of nodes with their total degree and the
/// aggregated weights between blocks.
struct Blocks {
    members: Vec<Vec<usize>>,
    weight: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Nonempty blocks by the smallest sweep rank of their members.
    order: Vec<usize>,
}

impl Blocks {
    fn new(g: &SimilarityGraph, block_of: &[usize], rank: &[usize]) -> Self {
        let n = g.node_count();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut weight = vec![0.0; n];
        for (i, &b) in block_of.iter().enumerate() {
            members[b].push(i);
            weight[b] += g.degree(i);
        }
        let mut adjacency: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (a, b, w) in g.edges() {
            let (x, y) = (block_of[a], block_of[b]);
            if x != y {
                *adjacency[x].entry(y).or_insert(0.0) += w;
                *adjacency[y].entry(x).or_insert(0.0) += w;
            }
        }
        let mut order: Vec<usize> = (0..n).filter(|&b| !members[b].is_empty()).collect();
        order.sort_by_key(|&b| members[b].iter().map(|&i| rank[i]).min());
        Self {
            members,
            weight,
            adjacency: adjacency.into_iter().map(|row| row.into_iter().collect()).collect(),
            order,
        }
    }
}

/// Per-cluster accumulator reused across gain evaluations.
struct Scratch {
    link: Vec<f64>,
    touched: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            link: vec![0.0; n],
            touched: Vec::new(),
        }
    }
}

struct State<'g> {
    graph: &'g SimilarityGraph,
    m: f64,
    labels: Vec<usize>,
    tot: Vec<f64>,
    size: Vec<usize>,
    free: BTreeSet<usize>,
}

impl<'g> State<'g> {
    fn singletons(graph: &'g SimilarityGraph) -> Self {
        let n = graph.node_count();
        Self {
            graph,
            m: graph.total_weight(),
            labels: (0..n).collect(),
            tot: graph.degrees().to_vec(),
            size: vec![1; n],
            free: BTreeSet::new(),
        }
    }

    fn run(mut self, order: &[usize]) -> Partition {
        let n = self.graph.node_count();
        let mut rank = vec![0; n];
        for (k, &i) in order.iter().enumerate() {
            rank[i] = k;
        }
        let singletons: Vec<usize> = (0..n).collect();
        // A shuffled order starts with local moves, as in Louvain; the
        // natural order starts with agglomeration.
        if rank != singletons {
            self.refine(&singletons, &rank);
        }
        loop {
            let (merged, levels) = self.merge_phase();
            let mut moved = false;
            for level in levels.iter().rev().chain([&singletons]) {
                moved |= self.refine(level, &rank);
            }
            if !merged && !moved {
                break;
            }
        }
        Partition::from_labels(&self.labels)
    }

    /// Greedy agglomeration of the current clusters. Returns whether any
    /// merge happened, and snapshots of the labels taken as the cluster
    /// count halves (finest first), for multi-level refinement.
    fn merge_phase(&mut self) -> (bool, Vec<Vec<usize>>) {
        let g = self.graph;
        let n = g.node_count();
        let m = self.m;
        let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (a, b, w) in g.edges() {
            let (ca, cb) = (self.labels[a], self.labels[b]);
            if ca != cb {
                *links[ca].entry(cb).or_insert(0.0) += w;
                *links[cb].entry(ca).or_insert(0.0) += w;
            }
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, &c) in self.labels.iter().enumerate() {
            members[c].push(i);
        }
        let mut clusters = members.iter().filter(|c| !c.is_empty()).count();
        let mut levels = Vec::new();
        if clusters < n {
            levels.push(self.labels.clone());
        }
        let mut next_level = clusters / 2;
        let mut version = vec![0u32; n];
        let tot = &mut self.tot;
        let gain = |tot: &[f64], c: usize, d: usize, e: f64| e / m - tot[c] * tot[d] / (2.0 * m * m);

        let mut heap: BinaryHeap<MergeCandidate> = BinaryHeap::new();
        for (c, row) in links.iter().enumerate() {
            for (&d, &e) in row.range(c + 1..) {
                let key = gain_key(gain(tot, c, d, e));
                if key > 0 {
                    heap.push((key, Reverse((c, d)), 0, 0));
                }
            }
        }

        let mut merged_any = false;
        while let Some((_, Reverse((c, d)), vc, vd)) = heap.pop() {
            if version[c] != vc || version[d] != vd {
                continue;
            }
            if clusters <= next_level {
                levels.push(self.labels.clone());
                next_level = clusters / 2;
            }
            // merge d into c (c < d)
            merged_any = true;
            clusters -= 1;
            version[c] += 1;
            version[d] += 1;
            let moved = std::mem::take(&mut members[d]);
            for &i in &moved {
                self.labels[i] = c;
            }
            members[c].extend(moved);
            self.size[c] += self.size[d];
            self.size[d] = 0;
            self.free.insert(d);
            tot[c] += tot[d];
            tot[d] = 0.0;

            let d_links = std::mem::take(&mut links[d]);
            links[c].remove(&d);
            for (x, e) in d_links {
                if x == c {
                    continue;
                }
                links[x].remove(&d);
                *links[x].entry(c).or_insert(0.0) += e;
                *links[c].entry(x).or_insert(0.0) += e;
            }
            for (&x, &e) in &links[c] {
                let key = gain_key(gain(tot, c, x, e));
                if key > 0 {
                    let pair = (c.min(x), c.max(x));
                    heap.push((key, Reverse(pair), version[pair.0], version[pair.1]));
                }
            }
        }
        (merged_any, levels)
    }

    /// Refinement on one level. Blocks are the nodes sharing a label in
    /// `block_of`; each lies inside a single cluster. Greedy sweeps move
    /// blocks to the neighboring or an empty cluster with the best positive
    /// gain until a sweep changes nothing; then a Kernighan–Lin pass looks
    /// for an improving sequence of moves that single moves cannot reach.
    /// The two alternate until the pass finds nothing. Returns whether any
    /// block moved.
    fn refine(&mut self, block_of: &[usize], rank: &[usize]) -> bool {
        let blocks = Blocks::new(self.graph, block_of, rank);
        let mut scratch = Scratch::new(self.graph.node_count());
        let mut moved_any = false;
        loop {
            moved_any |= self.greedy_sweeps(&blocks, &mut scratch);
            if blocks.members.len() > KL_MAX_BLOCKS || !self.kernighan_lin(&blocks, &mut scratch) {
                return moved_any;
            }
            moved_any = true;
        }
    }

    fn greedy_sweeps(&mut self, blocks: &Blocks, scratch: &mut Scratch) -> bool {
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for &b in &blocks.order {
                if let Some((key, to, _)) = self.best_move(blocks, b, scratch) {
                    if key > 0 {
                        let home = self.labels[blocks.members[b][0]];
                        self.move_block(&blocks.members[b], home, to, blocks.weight[b]);
                        moved = true;
                    }
                }
            }
            if !moved {
                return moved_any;
            }
            moved_any = true;
        }
    }

    /// One pass: repeatedly apply the best move of any unmoved block, even
    /// if it lowers Q, then roll back to the best prefix. Stops early after
    /// `KL_PATIENCE` moves without a new best. Returns whether a prefix was
    /// kept.
    fn kernighan_lin(&mut self, blocks: &Blocks, scratch: &mut Scratch) -> bool {
        let mut locked = vec![false; blocks.members.len()];
        let mut history: Vec<(usize, usize, usize)> = Vec::new();
        let (mut total, mut best_total, mut best_len) = (0.0, 0.0, 0usize);
        loop {
            let mut best: Option<(i64, usize, usize, f64)> = None;
            for &b in &blocks.order {
                if locked[b] {
                    continue;
                }
                if let Some((key, to, delta)) = self.best_move(blocks, b, scratch) {
                    if best.is_none_or(|(bk, _, _, _)| key > bk) {
                        best = Some((key, b, to, delta));
                    }
                }
            }
            let Some((_, b, to, delta)) = best else { break };
            let home = self.labels[blocks.members[b][0]];
            self.move_block(&blocks.members[b], home, to, blocks.weight[b]);
            locked[b] = true;
            history.push((b, home, to));
            total += delta;
            if total > best_total + KL_MIN_GAIN {
                best_total = total;
                best_len = history.len();
            } else if history.len() - best_len >= KL_PATIENCE {
                break;
            }
        }
        while history.len() > best_len {
            let (b, home, to) = history.pop().expect("nonempty history");
            self.move_block(&blocks.members[b], to, home, blocks.weight[b]);
        }
        best_len > 0
    }

    /// Best target cluster for block `b` and the quantized gain of moving
    /// there, positive or not. Neighboring clusters come first in label
    /// order, then the smallest empty label if the block does not fill its
    /// cluster.
    fn best_move(&self, blocks: &Blocks, b: usize, scratch: &mut Scratch) -> Option<(i64, usize, f64)> {
        let m = self.m;
        let k_b = blocks.weight[b];
        if k_b == 0.0 {
            return None;
        }
        let home = self.labels[blocks.members[b][0]];
        let Scratch { link, touched } = scratch;
        for &(x, w) in &blocks.adjacency[b] {
            let c = self.labels[blocks.members[x][0]];
            if link[c] == 0.0 {
                touched.push(c);
            }
            link[c] += w;
        }
        let k_home = link[home];
        let tot_home = self.tot[home] - k_b;
        let gain = |k_to: f64, tot_to: f64| {
            (k_to - k_home) / m - k_b * (tot_to - tot_home) / (2.0 * m * m)
        };

        touched.sort_unstable();
        let mut best: Option<(i64, usize, f64)> = None;
        for &c in touched.iter() {
            if c == home {
                continue;
            }
            let delta = gain(link[c], self.tot[c]);
            let key = gain_key(delta);
            if best.is_none_or(|(bk, _, _)| key > bk) {
                best = Some((key, c, delta));
            }
        }
        if self.size[home] > blocks.members[b].len() {
            if let Some(&empty) = self.free.first() {
                let delta = gain(0.0, 0.0);
                let key = gain_key(delta);
                if best.is_none_or(|(bk, bc, _)| key > bk || (key == bk && empty < bc)) {
                    best = Some((key, empty, delta));
                }
            }
        }
        for &c in touched.iter() {
            link[c] = 0.0;
        }
        touched.clear();
        best
    }

    fn move_block(&mut self, nodes: &[usize], from: usize, to: usize, weight: f64) {
        for &i in nodes {
            self.labels[i] = to;
        }
        self.tot[from] -= weight;
        self.tot[to] += weight;
        self.size[from] -= nodes.len();
        self.size[to] += nodes.len();
        self.free.remove(&to);
        if self.size[from] == 0 {
            self.tot[from] = 0.0;
            self.free.insert(from);
        }
    }
}

/// True if some single-node move to a neighboring or empty cluster raises
/// modularity by more than `tolerance`. Exhaustive; for tests and audits.
pub fn has_improving_move(graph: &SimilarityGraph, partition: &Partition, tolerance: f64) -> bool {
    let Ok(base) = modularity(graph, partition) else {
        return false;
    };
    let k = partition.cluster_count();
    for i in 0..graph.node_count() {
        let mut targets: BTreeSet<usize> = graph
            .neighbors(i)
            .iter()
            .map(|&(j, _)| partition.label(j))
            .collect();
        targets.insert(k);
        targets.remove(&partition.label(i));
        for t in targets {
            let mut labels = partition.labels().to_vec();
            labels[i] = t;
            let q = modularity(graph, &Partition::from_labels(&labels)).unwrap();
            if q > base + tolerance {
                return true;
            }
        }
    }
    false
}
