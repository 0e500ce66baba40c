//! Directed road network: intersections as nodes, road segments as
//! length-weighted directed edges.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

/// Expected header of the network CSV.
pub const NETWORK_HEADER: [&str; 4] = ["segment_id", "from_node", "to_node", "length_m"];

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate segment id `{id}`")]
    DuplicateSegment { line: u64, id: String },
    #[error("line {line}: segment `{id}` has non-positive length {length}")]
    NonPositiveLength { line: u64, id: String, length: f64 },
    #[error("segment `{0}` references an unknown node")]
    UnknownNode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A directed road segment `from -> to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Spatial length in meters, strictly positive.
    pub length: f64,
}

/// Immutable directed road network.
///
/// Segments keep their insertion order; [`SegmentIdx`] values index into it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: BTreeSet<String>,
    segments: Vec<Segment>,
    by_id: HashMap<String, SegmentIdx>,
    outgoing: HashMap<String, Vec<SegmentIdx>>,
}

/// Dense index of a segment inside its [`RoadNetwork`].
pub type SegmentIdx = usize;

impl RoadNetwork {
    /// Builds a network from segments, checking every type invariant.
    ///
    /// Self-loops are accepted; see [`RoadNetwork::warnings`].
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self, NetworkError> {
        let mut builder = NetworkBuilder::default();
        for (i, segment) in segments.into_iter().enumerate() {
            builder.push(segment, i as u64 + 1)?;
        }
        Ok(builder.finish())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains_node(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// |E|, the number of directed segments.
    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, idx: SegmentIdx) -> &Segment {
        &self.segments[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<SegmentIdx> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Segment> {
        self.index_of(id).map(|i| &self.segments[i])
    }

    /// Segments leaving `node`, in insertion order.
    pub fn outgoing(&self, node: &str) -> &[SegmentIdx] {
        self.outgoing.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// True iff the end node of one segment is the start node of the other.
    pub fn are_connected(&self, a: SegmentIdx, b: SegmentIdx) -> bool {
        are_connected(&self.segments[a], &self.segments[b])
    }

    /// Non-fatal findings, currently one entry per self-loop segment.
    pub fn warnings(&self) -> Vec<String> {
        self.segments
            .iter()
            .filter(|s| s.from == s.to)
            .map(|s| format!("segment `{}` is a self-loop on node `{}`", s.id, s.from))
            .collect()
    }

    /// Serializes the network in the CSV format accepted by [`load_network`].
    pub fn to_csv(&self) -> String {
        let mut out = NETWORK_HEADER.join(",");
        out.push('\n');
        for s in &self.segments {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.id,
                s.from,
                s.to,
                crate::format::sig12(s.length)
            ));
        }
        out
    }
}

/// True iff `a.to == b.from` or `b.to == a.from`.
pub fn are_connected(a: &Segment, b: &Segment) -> bool {
    a.to == b.from || b.to == a.from
}

#[derive(Default)]
struct NetworkBuilder {
    nodes: BTreeSet<String>,
    segments: Vec<Segment>,
    by_id: HashMap<String, SegmentIdx>,
    outgoing: HashMap<String, Vec<SegmentIdx>>,
}

impl NetworkBuilder {
    fn push(&mut self, segment: Segment, line: u64) -> Result<(), NetworkError> {
        if self.by_id.contains_key(&segment.id) {
            return Err(NetworkError::DuplicateSegment { line, id: segment.id });
        }
        // NaN fails this comparison as well.
        if segment.length <= 0.0 || !segment.length.is_finite() {
            return Err(NetworkError::NonPositiveLength {
                line,
                id: segment.id,
                length: segment.length,
            });
        }
        let idx = self.segments.len();
        self.nodes.insert(segment.from.clone());
        self.nodes.insert(segment.to.clone());
        self.outgoing.entry(segment.from.clone()).or_default().push(idx);
        self.by_id.insert(segment.id.clone(), idx);
        self.segments.push(segment);
        Ok(())
    }

    fn finish(self) -> RoadNetwork {
        RoadNetwork {
            nodes: self.nodes,
            segments: self.segments,
            by_id: self.by_id,
            outgoing: self.outgoing,
        }
    }
}

/// Parses a network CSV (`segment_id,from_node,to_node,length_m`).
///
/// Lines starting with `#` are skipped. Errors carry the 1-based line number
/// of the offending row.
pub fn load_network<R: Read>(source: R) -> Result<RoadNetwork, NetworkError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let header_line = header.position().map_or(1, |p| p.line());
    if header.iter().ne(NETWORK_HEADER.iter().copied()) {
        return Err(NetworkError::Parse {
            line: header_line,
            message: format!(
                "expected header `{}`, found `{}`",
                NETWORK_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut builder = NetworkBuilder::default();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != NETWORK_HEADER.len() {
            return Err(NetworkError::Parse {
                line,
                message: format!("expected 4 columns, found {}", record.len()),
            });
        }
        let field = |i: usize| -> Result<String, NetworkError> {
            let v = &record[i];
            if v.is_empty() {
                Err(NetworkError::Parse {
                    line,
                    message: format!("empty `{}`", NETWORK_HEADER[i]),
                })
            } else {
                Ok(v.to_owned())
            }
        };
        let length: f64 = record[3].parse().map_err(|_| NetworkError::Parse {
            line,
            message: format!("invalid length `{}`", &record[3]),
        })?;
        let segment = Segment {
            id: field(0)?,
            from: field(1)?,
            to: field(2)?,
            length,
        };
        builder.push(segment, line)?;
    }
    Ok(builder.finish())
}

fn csv_error(err: csv::Error, fallback_line: u64) -> NetworkError {
    let line = err.position().map_or(fallback_line, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => NetworkError::Io(e),
        other => NetworkError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}
