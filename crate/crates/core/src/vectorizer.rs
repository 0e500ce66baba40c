//! TF-IDF style weighting of trajectories (bag of segments) and segments
//! (bag of trajectories), plus cosine similarity between sparse vectors.
//!
//! Trajectory side: `ω(e,T) = ssf(e,T) · itf(e)` with
//! `ssf(e,T) = n(e,T)·len(e) / Σ_{e'∈T} n(e',T)·len(e')` and
//! `itf(e) = ln(|𝒯| / df(e))`.
//!
//! Segment side: `ω(T,e) = n(e,T) / Σ_{T'} n(e,T') · ln(|E| / distinct(T))`,
//! with `|E|` the number of segments in the network.
//!
//! All logarithms are natural ([`LOG_BASE`]).

use std::sync::OnceLock;

use crate::corpus::{Corpus, CorpusError, TrajectoryIdx};
use crate::network::SegmentIdx;

/// Declared logarithm base, recorded in run manifests.
pub const LOG_BASE: &str = "e";

#[derive(Debug, thiserror::Error)]
pub enum WeightError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("itf undefined: segment `{0}` is not traveled by any trajectory")]
    UndefinedItf(String),
    #[error("segment weight undefined: segment `{0}` is not traveled by any trajectory")]
    UndefinedWeight(String),
}

/// Sparse nonnegative feature vector, entries sorted by feature index.
///
/// Features are segment indices for trajectory vectors and trajectory
/// indices for segment vectors. Zero weights are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    owner: usize,
    entries: Vec<(usize, f64)>,
    norm: f64,
}

impl WeightVector {
    pub fn new(owner: usize, mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|&(f, _)| f);
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        Self { owner, entries, norm }
    }

    /// Index of the trajectory or segment this vector describes.
    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, feature: usize) -> f64 {
        self.entries
            .binary_search_by_key(&feature, |&(f, _)| f)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.owner,
            self.entries.iter().map(|&(f, w)| (f, w * factor)).collect(),
        )
    }
}

/// Cosine similarity of two nonnegative sparse vectors, in `[0, 1]`.
///
/// Zero-norm vectors have similarity 0 with everything.
pub fn cosine(u: &WeightVector, v: &WeightVector) -> f64 {
    if u.norm == 0.0 || v.norm == 0.0 {
        return 0.0;
    }
    let (a, b) = (&u.entries, &v.entries);
    let (mut i, mut j) = (0, 0);
    let mut dot = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    (dot / (u.norm * v.norm)).clamp(0.0, 1.0)
}

/// Spatial segment frequency of `segment` in `trajectory`.
pub fn ssf(corpus: &Corpus, segment: &str, trajectory: &str) -> Result<f64, WeightError> {
    let t = corpus.require_trajectory(trajectory)?;
    Ok(corpus
        .network()
        .index_of(segment)
        .map_or(0.0, |e| ssf_idx(corpus, e, t)))
}

pub fn ssf_idx(corpus: &Corpus, segment: SegmentIdx, trajectory: TrajectoryIdx) -> f64 {
    let n = corpus.occurrences_idx(segment, trajectory);
    if n == 0 {
        return 0.0;
    }
    let net = corpus.network();
    n as f64 * net.segment(segment).length / traveled_length(corpus, trajectory)
}

fn traveled_length(corpus: &Corpus, trajectory: TrajectoryIdx) -> f64 {
    let net = corpus.network();
    corpus
        .segment_counts(trajectory)
        .iter()
        .map(|&(s, n)| n as f64 * net.segment(s).length)
        .sum()
}

/// Inverse trajectory frequency `ln(|𝒯| / df(e))`.
pub fn itf(corpus: &Corpus, segment: &str) -> Result<f64, WeightError> {
    let e = corpus.require_segment(segment)?;
    itf_idx(corpus, e).ok_or_else(|| WeightError::UndefinedItf(segment.to_owned()))
}

pub fn itf_idx(corpus: &Corpus, segment: SegmentIdx) -> Option<f64> {
    match corpus.document_frequency(segment) {
        0 => None,
        df => Some((corpus.len() as f64 / df as f64).ln()),
    }
}

/// Weight of `trajectory` when characterizing `segment`.
pub fn segment_weight(corpus: &Corpus, trajectory: &str, segment: &str) -> Result<f64, WeightError> {
    let t = corpus.require_trajectory(trajectory)?;
    let e = corpus.require_segment(segment)?;
    segment_weight_idx(corpus, t, e).ok_or_else(|| WeightError::UndefinedWeight(segment.to_owned()))
}

pub fn segment_weight_idx(
    corpus: &Corpus,
    trajectory: TrajectoryIdx,
    segment: SegmentIdx,
) -> Option<f64> {
    let total = corpus.segment_total(segment);
    if total == 0 {
        return None;
    }
    let n = corpus.occurrences_idx(segment, trajectory);
    if n == 0 {
        return Some(0.0);
    }
    Some(n as f64 / total as f64 * trajectory_specificity(corpus, trajectory))
}

// ln(|E| / distinct segments of T)
fn trajectory_specificity(corpus: &Corpus, trajectory: TrajectoryIdx) -> f64 {
    let edges = corpus.network().segment_count() as f64;
    (edges / corpus.distinct_segments(trajectory) as f64).ln()
}

fn build_trajectory_vector(corpus: &Corpus, t: TrajectoryIdx) -> WeightVector {
    let total_length = traveled_length(corpus, t);
    let net = corpus.network();
    let entries = corpus
        .segment_counts(t)
        .iter()
        .map(|&(s, n)| {
            let ssf = n as f64 * net.segment(s).length / total_length;
            // every segment of t has df >= 1
            let itf = itf_idx(corpus, s).unwrap_or(0.0);
            (s, ssf * itf)
        })
        .collect();
    WeightVector::new(t, entries)
}

fn build_segment_vector(corpus: &Corpus, e: SegmentIdx) -> Option<WeightVector> {
    let total = corpus.segment_total(e);
    if total == 0 {
        return None;
    }
    let entries = corpus
        .postings(e)
        .iter()
        .map(|&(t, n)| (t, n as f64 / total as f64 * trajectory_specificity(corpus, t)))
        .collect();
    Some(WeightVector::new(e, entries))
}

/// Lazily computed, per-corpus cache of weight vectors.
///
/// Safe to share across threads; concurrent fills compute identical values.
pub struct Vectorizer<'c> {
    corpus: &'c Corpus,
    trajectories: Vec<OnceLock<WeightVector>>,
    segments: Vec<OnceLock<Option<WeightVector>>>,
}

impl<'c> Vectorizer<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        Self {
            corpus,
            trajectories: (0..corpus.len()).map(|_| OnceLock::new()).collect(),
            segments: (0..corpus.network().segment_count())
                .map(|_| OnceLock::new())
                .collect(),
        }
    }

    pub fn corpus(&self) -> &'c Corpus {
        self.corpus
    }

    pub fn trajectory_vector(&self, trajectory: &str) -> Result<&WeightVector, WeightError> {
        let t = self.corpus.require_trajectory(trajectory)?;
        Ok(self.trajectory_vector_idx(t))
    }

    pub fn trajectory_vector_idx(&self, t: TrajectoryIdx) -> &WeightVector {
        self.trajectories[t].get_or_init(|| build_trajectory_vector(self.corpus, t))
    }

    pub fn segment_vector(&self, segment: &str) -> Result<&WeightVector, WeightError> {
        let e = self.corpus.require_segment(segment)?;
        self.segment_vector_idx(e)
            .ok_or_else(|| WeightError::UndefinedWeight(segment.to_owned()))
    }

    pub fn segment_vector_idx(&self, e: SegmentIdx) -> Option<&WeightVector> {
        self.segments[e]
            .get_or_init(|| build_segment_vector(self.corpus, e))
            .as_ref()
    }
}
