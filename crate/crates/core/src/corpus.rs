//! Network-constrained trajectories and the occurrence statistics both
//! weighting schemes draw on.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::sync::Arc;

use crate::network::{RoadNetwork, SegmentIdx};

/// Expected header of the trajectory CSV.
pub const TRAJECTORY_HEADER: [&str; 2] = ["trajectory_id", "segment_ids"];

/// Dense index of a trajectory inside its [`Corpus`] (id order).
pub type TrajectoryIdx = usize;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("trajectory `{trajectory}` references unknown segment `{segment}`")]
    UnknownSegment { trajectory: String, segment: String },
    #[error("trajectory `{trajectory}`: segments `{first}` and `{second}` are not connected head-to-tail")]
    Disconnected {
        trajectory: String,
        first: String,
        second: String,
    },
    #[error("duplicate trajectory id `{0}`")]
    DuplicateTrajectory(String),
    #[error("trajectory `{0}` has no segments")]
    EmptyTrajectory(String),
    #[error("unknown trajectory id `{0}`")]
    UnknownTrajectory(String),
    #[error("unknown segment id `{0}`")]
    UnknownSegmentId(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: u64,
        #[source]
        source: Box<CorpusError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trip expressed as an ordered sequence of connected segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub id: String,
    pub segments: Vec<SegmentIdx>,
}

/// A validated set of trajectories over one network, with precomputed
/// occurrence statistics.
///
/// Trajectories are stored sorted by id, so every statistic and every index
/// is independent of input order.
#[derive(Debug, Clone)]
pub struct Corpus {
    network: Arc<RoadNetwork>,
    trajectories: Vec<Trajectory>,
    by_id: HashMap<String, TrajectoryIdx>,
    // per trajectory: (segment, n_{e,T}) sorted by segment
    counts: Vec<Vec<(SegmentIdx, usize)>>,
    // per segment: (trajectory, n_{e,T}) sorted by trajectory
    postings: Vec<Vec<(TrajectoryIdx, usize)>>,
    segment_totals: Vec<usize>,
}

impl Corpus {
    /// Validates raw `(id, segment ids)` rows and computes statistics.
    pub fn new<I, S>(network: Arc<RoadNetwork>, rows: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (String, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut trajectories = Vec::new();
        for (id, segs) in rows {
            trajectories.push(resolve(&network, id, &segs)?);
        }
        Self::from_trajectories(network, trajectories)
    }

    /// Builds a corpus from already-resolved trajectories, re-checking
    /// connectivity and id uniqueness.
    pub fn from_trajectories(
        network: Arc<RoadNetwork>,
        mut trajectories: Vec<Trajectory>,
    ) -> Result<Self, CorpusError> {
        for t in &trajectories {
            check_trajectory(&network, t)?;
        }
        trajectories.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in trajectories.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(CorpusError::DuplicateTrajectory(pair[0].id.clone()));
            }
        }

        let by_id = trajectories
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), i))
            .collect();
        let mut postings = vec![Vec::new(); network.segment_count()];
        let mut segment_totals = vec![0; network.segment_count()];
        let counts: Vec<Vec<(SegmentIdx, usize)>> = trajectories
            .iter()
            .map(|t| {
                let mut c = BTreeMap::new();
                for &s in &t.segments {
                    *c.entry(s).or_insert(0usize) += 1;
                }
                c.into_iter().collect()
            })
            .collect();
        for (t, row) in counts.iter().enumerate() {
            for &(s, n) in row {
                postings[s].push((t, n));
                segment_totals[s] += n;
            }
        }
        Ok(Self {
            network,
            trajectories,
            by_id,
            counts,
            postings,
            segment_totals,
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.network
    }

    pub fn network_arc(&self) -> &Arc<RoadNetwork> {
        &self.network
    }

    /// |𝒯|.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn trajectory(&self, idx: TrajectoryIdx) -> &Trajectory {
        &self.trajectories[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<TrajectoryIdx> {
        self.by_id.get(id).copied()
    }

    pub(crate) fn require_trajectory(&self, id: &str) -> Result<TrajectoryIdx, CorpusError> {
        self.index_of(id)
            .ok_or_else(|| CorpusError::UnknownTrajectory(id.to_owned()))
    }

    pub(crate) fn require_segment(&self, id: &str) -> Result<SegmentIdx, CorpusError> {
        self.network
            .index_of(id)
            .ok_or_else(|| CorpusError::UnknownSegmentId(id.to_owned()))
    }

    /// n_{e,T}: how many times trajectory `t` travels segment `e`.
    pub fn occurrences(&self, segment: &str, trajectory: &str) -> Result<usize, CorpusError> {
        let t = self.require_trajectory(trajectory)?;
        Ok(self
            .network
            .index_of(segment)
            .map_or(0, |e| self.occurrences_idx(e, t)))
    }

    pub fn occurrences_idx(&self, segment: SegmentIdx, trajectory: TrajectoryIdx) -> usize {
        let row = &self.counts[trajectory];
        row.binary_search_by_key(&segment, |&(s, _)| s)
            .map_or(0, |i| row[i].1)
    }

    /// Distinct segments of a trajectory with their multiplicities, sorted by
    /// segment index.
    pub fn segment_counts(&self, trajectory: TrajectoryIdx) -> &[(SegmentIdx, usize)] {
        &self.counts[trajectory]
    }

    /// Trajectories traveling a segment with their multiplicities, sorted by
    /// trajectory index.
    pub fn postings(&self, segment: SegmentIdx) -> &[(TrajectoryIdx, usize)] {
        &self.postings[segment]
    }

    /// Number of distinct trajectories containing `segment`.
    pub fn document_frequency(&self, segment: SegmentIdx) -> usize {
        self.postings[segment].len()
    }

    /// Σ_{T'} n_{e,T'}.
    pub fn segment_total(&self, segment: SegmentIdx) -> usize {
        self.segment_totals[segment]
    }

    /// Number of distinct segments in a trajectory.
    pub fn distinct_segments(&self, trajectory: TrajectoryIdx) -> usize {
        self.counts[trajectory].len()
    }

    /// Segments traveled by at least one trajectory, in network order.
    pub fn traveled_segments(&self) -> impl Iterator<Item = SegmentIdx> + '_ {
        (0..self.postings.len()).filter(|&s| !self.postings[s].is_empty())
    }

    /// Serializes the corpus in the CSV format accepted by [`load_trajectories`].
    pub fn to_csv(&self) -> String {
        let mut out = TRAJECTORY_HEADER.join(",");
        out.push('\n');
        for t in &self.trajectories {
            out.push_str(&t.id);
            out.push(',');
            let ids: Vec<&str> = t
                .segments
                .iter()
                .map(|&s| self.network.segment(s).id.as_str())
                .collect();
            out.push_str(&ids.join(";"));
            out.push('\n');
        }
        out
    }
}

fn resolve<S: AsRef<str>>(
    network: &RoadNetwork,
    id: String,
    segs: &[S],
) -> Result<Trajectory, CorpusError> {
    let mut segments = Vec::with_capacity(segs.len());
    for s in segs {
        let s = s.as_ref();
        match network.index_of(s) {
            Some(idx) => segments.push(idx),
            None => {
                return Err(CorpusError::UnknownSegment {
                    trajectory: id,
                    segment: s.to_owned(),
                })
            }
        }
    }
    Ok(Trajectory { id, segments })
}

fn check_trajectory(network: &RoadNetwork, t: &Trajectory) -> Result<(), CorpusError> {
    if t.segments.is_empty() {
        return Err(CorpusError::EmptyTrajectory(t.id.clone()));
    }
    if let Some(&bad) = t.segments.iter().find(|&&s| s >= network.segment_count()) {
        return Err(CorpusError::UnknownSegment {
            trajectory: t.id.clone(),
            segment: format!("#{bad}"),
        });
    }
    for pair in t.segments.windows(2) {
        let (a, b) = (network.segment(pair[0]), network.segment(pair[1]));
        if a.to != b.from {
            return Err(CorpusError::Disconnected {
                trajectory: t.id.clone(),
                first: a.id.clone(),
                second: b.id.clone(),
            });
        }
    }
    Ok(())
}

/// Parses a trajectory CSV (`trajectory_id,segment_ids`, ids `;`-separated)
/// against `network`.
pub fn load_trajectories<R: Read>(
    source: R,
    network: Arc<RoadNetwork>,
) -> Result<Corpus, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| CorpusError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(CorpusError::Parse {
            line: header.position().map_or(1, |p| p.line()),
            message: format!("expected header `{}`", TRAJECTORY_HEADER.join(",")),
        });
    }

    let mut trajectories = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CorpusError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let at = |source: CorpusError| CorpusError::AtLine {
            line,
            source: Box::new(source),
        };
        if record.len() != 2 {
            return Err(CorpusError::Parse {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(CorpusError::Parse {
                line,
                message: "empty trajectory id".into(),
            });
        }
        if seen.insert(id.clone(), line).is_some() {
            return Err(at(CorpusError::DuplicateTrajectory(id)));
        }
        let segs: Vec<&str> = record[1]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let t = resolve(&network, id, &segs).map_err(at)?;
        check_trajectory(&network, &t).map_err(at)?;
        trajectories.push(t);
    }
    Corpus::from_trajectories(network, trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{RoadNetwork, Segment};

    pub(crate) fn chain_network() -> Arc<RoadNetwork> {
        let seg = |id: &str, f: &str, t: &str, l: f64| Segment {
            id: id.into(),
            from: f.into(),
            to: t.into(),
            length: l,
        };
        Arc::new(
            RoadNetwork::from_segments(vec![
                seg("s1", "A", "B", 100.0),
                seg("s2", "B", "C", 100.0),
                seg("s3", "C", "D", 100.0),
                seg("s4", "B", "D", 200.0),
                seg("s5", "C", "B", 100.0),
            ])
            .unwrap(),
        )
    }

    fn load(text: &str) -> Result<Corpus, CorpusError> {
        load_trajectories(text.as_bytes(), chain_network())
    }

    #[test]
    fn document_frequencies_by_counting() {
        let c = load("trajectory_id,segment_ids\nT1,s1;s2\nT2,s1;s2;s3\n").unwrap();
        let df = |s: &str| c.document_frequency(c.network().index_of(s).unwrap());
        assert_eq!((df("s1"), df("s2"), df("s3")), (2, 2, 1));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn connectivity_violation_names_pair() {
        let err = load("trajectory_id,segment_ids\nT9,s1;s3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        match err {
            CorpusError::AtLine { source, .. } => match *source {
                CorpusError::Disconnected { first, second, .. } => {
                    assert_eq!((first.as_str(), second.as_str()), ("s1", "s3"))
                }
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_segment_rejected() {
        let err = load("trajectory_id,segment_ids\nT9,s99\n").unwrap_err();
        assert!(err.to_string().contains("s99"));
        assert!(err.to_string().contains("T9"));
    }

    #[test]
    fn duplicate_and_empty_rejected() {
        assert!(load("trajectory_id,segment_ids\nT1,s1\nT1,s2\n")
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        assert!(load("trajectory_id,segment_ids\nT1,\n")
            .unwrap_err()
            .to_string()
            .contains("no segments"));
    }

    #[test]
    fn occurrence_counts() {
        let c = load("trajectory_id,segment_ids\nT1,s1;s2\nLOOP,s2;s5;s2\n").unwrap();
        assert_eq!(c.occurrences("s2", "T1").unwrap(), 1);
        assert_eq!(c.occurrences("s4", "T1").unwrap(), 0);
        assert_eq!(c.occurrences("s2", "LOOP").unwrap(), 2);
        assert!(c.occurrences("s2", "nope").is_err());
        let s2 = c.network().index_of("s2").unwrap();
        assert_eq!(c.segment_total(s2), 3);
        assert_eq!(c.document_frequency(s2), 2);
    }

    #[test]
    fn input_order_does_not_matter() {
        let a = load("trajectory_id,segment_ids\nT1,s1;s2\nT2,s1;s4\n").unwrap();
        let b = load("trajectory_id,segment_ids\nT2,s1;s4\nT1,s1;s2\n").unwrap();
        assert_eq!(a.trajectories(), b.trajectories());
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn incidence_pairs_agree() {
        let c = load("trajectory_id,segment_ids\nT1,s1;s2\nT2,s1;s2;s3\nT3,s1;s4\nT4,s2;s5;s2\n")
            .unwrap();
        let df_sum: usize = (0..c.network().segment_count())
            .map(|s| c.document_frequency(s))
            .sum();
        let distinct_sum: usize = (0..c.len()).map(|t| c.distinct_segments(t)).sum();
        assert_eq!(df_sum, distinct_sum);
        for s in 0..c.network().segment_count() {
            let total: usize = (0..c.len()).map(|t| c.occurrences_idx(s, t)).sum();
            assert_eq!(total, c.segment_total(s));
            assert!(c.document_frequency(s) <= c.len());
        }
    }
}
