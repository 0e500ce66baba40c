//! Seeded synthetic grid networks and trajectory corpora with planted
//! groups, for benchmarks and tests.
//!
//! Each group travels the shortest path between an origin and a destination.
//! Every hop `u -> v` of that path is independently replaced, with the
//! group's detour probability, by a rectangular deviation `u -> a -> b -> v`
//! through the parallel street next to it.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::community::derive_seed;
use crate::corpus::{Corpus, CorpusError, Trajectory};
use crate::network::{NetworkError, RoadNetwork, Segment, SegmentIdx};

pub const TRUTH_HEADER: &str = "trajectory_id,group_label";
pub const GROUPS_HEADER: [&str; 4] = ["origin", "destination", "count", "detour_probability"];

pub const NETWORK_FILE: &str = "network.csv";
pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("group {group}: node `{node}` is not in the network")]
    UnknownNode { group: usize, node: String },
    #[error("group {group}: `{destination}` is unreachable from `{origin}`")]
    Unreachable {
        group: usize,
        origin: String,
        destination: String,
    },
    #[error("groups file line {line}: {message}")]
    GroupsParse { line: u64, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSpec {
    pub origin: String,
    pub destination: String,
    pub count: usize,
    pub detour_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationSpec {
    /// Nodes per row.
    pub width: usize,
    /// Nodes per column.
    pub height: usize,
    /// Base segment length in meters.
    pub segment_length: f64,
    /// Lengths are drawn uniformly from `base · (1 ± jitter)`.
    pub jitter: f64,
    pub groups: Vec<GroupSpec>,
    pub seed: u64,
}

impl GenerationSpec {
    pub fn grid(width: usize, height: usize, seed: u64) -> Self {
        Self {
            width,
            height,
            segment_length: 100.0,
            jitter: 0.1,
            groups: Vec::new(),
            seed,
        }
    }

    pub fn with_group(mut self, origin: &str, destination: &str, count: usize, detour: f64) -> Self {
        self.groups.push(GroupSpec {
            origin: origin.to_owned(),
            destination: destination.to_owned(),
            count,
            detour_probability: detour,
        });
        self
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: String| Err(DatagenError::InvalidSpec(m));
        if self.width < 2 || self.height < 2 {
            return bad(format!("grid {}x{} must be at least 2x2", self.width, self.height));
        }
        if !(self.segment_length > 0.0 && self.segment_length.is_finite()) {
            return bad(format!("segment length {} must be positive", self.segment_length));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return bad(format!("jitter {} not in [0, 1)", self.jitter));
        }
        for (g, group) in self.groups.iter().enumerate() {
            if group.count < 1 {
                return bad(format!("group {g}: count must be >= 1"));
            }
            if !(0.0..1.0).contains(&group.detour_probability) {
                return bad(format!(
                    "group {g}: detour probability {} not in [0, 1)",
                    group.detour_probability
                ));
            }
            if group.origin == group.destination {
                return bad(format!("group {g}: origin equals destination"));
            }
        }
        Ok(())
    }
}

/// Grid node name for column `x`, row `y`.
pub fn node_name(x: usize, y: usize) -> String {
    format!("n{x}_{y}")
}

/// Grid with both directed segments for every horizontal and vertical
/// adjacency. Segment `a-b` runs from node `a` to node `b`.
pub fn generate_network(spec: &GenerationSpec) -> Result<RoadNetwork, DatagenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    let mut segments = Vec::with_capacity(2 * (2 * spec.width * spec.height - spec.width - spec.height));
    let mut push = |from: String, to: String, rng: &mut ChaCha8Rng| {
        let u: f64 = rng.gen_range(-1.0..1.0);
        // millimeter precision keeps the CSV export exact
        let length = (spec.segment_length * (1.0 + spec.jitter * u) * 1000.0).round() / 1000.0;
        segments.push(Segment {
            id: format!("{from}-{to}"),
            from,
            to,
            length,
        });
    };
    for y in 0..spec.height {
        for x in 0..spec.width {
            let here = node_name(x, y);
            if x + 1 < spec.width {
                let right = node_name(x + 1, y);
                push(here.clone(), right.clone(), &mut rng);
                push(right, here.clone(), &mut rng);
            }
            if y + 1 < spec.height {
                let below = node_name(x, y + 1);
                push(here.clone(), below.clone(), &mut rng);
                push(below, here, &mut rng);
            }
        }
    }
    Ok(RoadNetwork::from_segments(segments)?)
}

#[derive(Clone, Copy, PartialEq)]
struct Visit {
    dist: f64,
    node: usize,
}

impl Eq for Visit {}

impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path by segment length; among equal-length paths the
/// predecessor with the smallest node id wins.
pub fn shortest_path(network: &RoadNetwork, origin: &str, destination: &str) -> Option<Vec<SegmentIdx>> {
    let names: Vec<&str> = network.nodes().collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let (&src, &dst) = (index.get(origin)?, index.get(destination)?);
    let mut dist = vec![f64::INFINITY; names.len()];
    let mut pred: Vec<Option<(usize, SegmentIdx)>> = vec![None; names.len()];
    let mut done = vec![false; names.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Visit { dist: 0.0, node: src });
    while let Some(Visit { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == dst {
            break;
        }
        for &s in network.outgoing(names[u]) {
            let seg = network.segment(s);
            let v = index[seg.to.as_str()];
            if done[v] {
                continue;
            }
            let nd = d + seg.length;
            let better = nd < dist[v] || (nd == dist[v] && pred[v].is_some_and(|(p, _)| u < p));
            if better {
                dist[v] = nd;
                pred[v] = Some((u, s));
                heap.push(Visit { dist: nd, node: v });
            }
        }
    }
    if !dist[dst].is_finite() || src == dst {
        return None;
    }
    let mut path = Vec::new();
    let mut at = dst;
    while let Some((p, s)) = pred[at] {
        path.push(s);
        at = p;
    }
    path.reverse();
    Some(path)
}

/// Rectangular deviations `u -> a -> b -> v` around the segment `u -> v`,
/// ordered by `(a, b)` node id.
fn detours(network: &RoadNetwork, hop: SegmentIdx) -> Vec<[SegmentIdx; 3]> {
    let seg = network.segment(hop);
    let (u, v) = (seg.from.as_str(), seg.to.as_str());
    let mut out = Vec::new();
    for &ua in network.outgoing(u) {
        let a = network.segment(ua).to.as_str();
        if a == v || a == u {
            continue;
        }
        for &ab in network.outgoing(a) {
            let b = network.segment(ab).to.as_str();
            if b == u || b == v || b == a {
                continue;
            }
            for &bv in network.outgoing(b) {
                if network.segment(bv).to == v {
                    out.push((a, b, [ua, ab, bv]));
                }
            }
        }
    }
    out.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    out.into_iter().map(|(_, _, s)| s).collect()
}

/// Trajectory id → group index.
pub type GroundTruth = BTreeMap<String, usize>;

/// Draws every group's trajectories. Ids are `t00000, t00001, ...` in group
/// order.
pub fn generate_corpus(
    spec: &GenerationSpec,
    network: Arc<RoadNetwork>,
) -> Result<(Corpus, GroundTruth), DatagenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let mut trajectories = Vec::new();
    let mut truth = GroundTruth::new();
    for (g, group) in spec.groups.iter().enumerate() {
        for node in [&group.origin, &group.destination] {
            if !network.contains_node(node) {
                return Err(DatagenError::UnknownNode {
                    group: g,
                    node: node.clone(),
                });
            }
        }
        let path = shortest_path(&network, &group.origin, &group.destination).ok_or_else(|| {
            DatagenError::Unreachable {
                group: g,
                origin: group.origin.clone(),
                destination: group.destination.clone(),
            }
        })?;
        let options: Vec<Vec<[SegmentIdx; 3]>> = path.iter().map(|&h| detours(&network, h)).collect();
        for _ in 0..group.count {
            let mut segments = Vec::with_capacity(path.len() * 2);
            for (&hop, alts) in path.iter().zip(&options) {
                let detour = rng.gen_bool(group.detour_probability) && !alts.is_empty();
                if detour {
                    let pick = rng.gen_range(0..alts.len());
                    segments.extend_from_slice(&alts[pick]);
                } else {
                    segments.push(hop);
                }
            }
            let id = format!("t{:05}", trajectories.len());
            truth.insert(id.clone(), g);
            trajectories.push(Trajectory { id, segments });
        }
    }
    let corpus = Corpus::from_trajectories(network, trajectories)?;
    Ok((corpus, truth))
}

/// Segment id → label of the group that travels it most (smallest group
/// index on ties). Covers every traveled segment.
pub fn segment_truth(corpus: &Corpus, truth: &GroundTruth) -> BTreeMap<String, usize> {
    let net = corpus.network();
    corpus
        .traveled_segments()
        .map(|s| {
            let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
            for &(t, n) in corpus.postings(s) {
                *votes.entry(truth[&corpus.trajectory(t).id]).or_insert(0) += n;
            }
            let best = votes
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&g, _)| g)
                .expect("traveled segment has postings");
            (net.segment(s).id.clone(), best)
        })
        .collect()
}

pub fn truth_csv(truth: &GroundTruth) -> String {
    crate::format::write_labels(
        TRUTH_HEADER,
        truth.iter().map(|(id, g)| (id.as_str(), g.to_string())),
    )
}

/// Writes the network, trajectory and ground-truth CSVs into `dir`.
pub fn export_corpus(corpus: &Corpus, truth: &GroundTruth, dir: &Path) -> Result<Vec<PathBuf>, DatagenError> {
    let write = |name: &str, text: String| -> Result<PathBuf, DatagenError> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| DatagenError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    };
    Ok(vec![
        write(NETWORK_FILE, corpus.network().to_csv())?,
        write(TRAJECTORY_FILE, corpus.to_csv())?,
        write(TRUTH_FILE, truth_csv(truth))?,
    ])
}

/// Parses a groups file: header `origin,destination,count,detour_probability`.
pub fn parse_groups<R: Read>(source: R) -> Result<Vec<GroupSpec>, DatagenError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let err = |line: u64, message: String| DatagenError::GroupsParse { line, message };
    let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.iter().ne(GROUPS_HEADER.iter().copied()) {
        return Err(err(1, format!("expected header `{}`", GROUPS_HEADER.join(","))));
    }
    let mut groups = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(err(line, format!("expected 4 columns, found {}", record.len())));
        }
        let count = record[2]
            .parse()
            .map_err(|_| err(line, format!("invalid count `{}`", &record[2])))?;
        let detour_probability = record[3]
            .parse()
            .map_err(|_| err(line, format!("invalid detour probability `{}`", &record[3])))?;
        groups.push(GroupSpec {
            origin: record[0].to_owned(),
            destination: record[1].to_owned(),
            count,
            detour_probability,
        });
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_segment_counts() {
        let net = generate_network(&GenerationSpec::grid(3, 3, 1)).unwrap();
        assert_eq!((net.node_count(), net.segment_count()), (9, 24));
        let net = generate_network(&GenerationSpec::grid(2, 2, 1)).unwrap();
        assert_eq!((net.node_count(), net.segment_count()), (4, 8));
    }

    #[test]
    fn lengths_stay_within_jitter() {
        let spec = GenerationSpec::grid(5, 4, 3);
        let net = generate_network(&spec).unwrap();
        for s in net.segments() {
            assert!(s.length >= 89.999 && s.length <= 110.001, "{}", s.length);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_network(&GenerationSpec::grid(1, 5, 0)).is_err());
        let mut spec = GenerationSpec::grid(3, 3, 0);
        spec.jitter = 1.0;
        assert!(spec.validate().is_err());
        let spec = GenerationSpec::grid(3, 3, 0).with_group("n0_0", "n2_2", 1, 1.0);
        assert!(spec.validate().is_err());
        let spec = GenerationSpec::grid(3, 3, 0).with_group("n0_0", "n2_2", 0, 0.1);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn straight_corridor_is_shortest() {
        let spec = GenerationSpec::grid(6, 3, 2);
        let net = generate_network(&spec).unwrap();
        let path = shortest_path(&net, "n0_1", "n5_1").unwrap();
        assert_eq!(path.len(), 5);
        assert_eq!(net.segment(path[0]).from, "n0_1");
        assert_eq!(net.segment(path[4]).to, "n5_1");
    }

    #[test]
    fn unknown_corridor_node() {
        let spec = GenerationSpec::grid(3, 3, 0).with_group("n0_0", "n9_9", 2, 0.0);
        let net = Arc::new(generate_network(&spec).unwrap());
        assert!(matches!(
            generate_corpus(&spec, net),
            Err(DatagenError::UnknownNode { .. })
        ));
    }

    #[test]
    fn unreachable_corridor() {
        let seg = |id: &str, f: &str, t: &str| Segment {
            id: id.into(),
            from: f.into(),
            to: t.into(),
            length: 1.0,
        };
        let net = Arc::new(RoadNetwork::from_segments(vec![seg("a", "X", "Y"), seg("b", "Z", "W")]).unwrap());
        let mut spec = GenerationSpec::grid(2, 2, 0).with_group("X", "W", 1, 0.0);
        spec.width = 2;
        assert!(matches!(
            generate_corpus(&spec, net),
            Err(DatagenError::Unreachable { .. })
        ));
    }

    #[test]
    fn detours_rejoin_the_corridor() {
        let spec = GenerationSpec::grid(6, 5, 4).with_group("n0_2", "n5_2", 30, 0.5);
        let net = Arc::new(generate_network(&spec).unwrap());
        let (corpus, truth) = generate_corpus(&spec, net).unwrap();
        assert_eq!(corpus.len(), 30);
        assert_eq!(truth.len(), 30);
        let lengths: Vec<usize> = corpus.trajectories().iter().map(|t| t.segments.len()).collect();
        assert!(lengths.iter().any(|&l| l > 5));
        for t in corpus.trajectories() {
            let net = corpus.network();
            assert_eq!(net.segment(t.segments[0]).from, "n0_2");
            assert_eq!(net.segment(*t.segments.last().unwrap()).to, "n5_2");
            assert_eq!((t.segments.len() - 5) % 2, 0);
        }
    }

    #[test]
    fn zero_detour_gives_identical_trajectories() {
        let spec = GenerationSpec::grid(5, 5, 9).with_group("n0_0", "n4_0", 4, 0.0);
        let net = Arc::new(generate_network(&spec).unwrap());
        let (corpus, _) = generate_corpus(&spec, net).unwrap();
        let first = &corpus.trajectories()[0].segments;
        assert!(corpus.trajectories().iter().all(|t| &t.segments == first));
    }

    #[test]
    fn groups_file() {
        let text = "origin,destination,count,detour_probability\n# comment\nn0_0,n3_0,10,0.2\nn0_1,n3_1,5,0\n";
        let groups = parse_groups(text.as_bytes()).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].count, 10);
        assert_eq!(groups[1].detour_probability, 0.0);
        assert!(parse_groups("origin,destination,count,detour_probability\na,b,x,0\n".as_bytes()).is_err());
    }
}
