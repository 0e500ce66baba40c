//! Average-linkage agglomerative clustering on similarities, and the
//! adjusted Rand index for comparing partitions.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::community::Partition;
use crate::format::sig12;
use crate::similarity::SimilarityGraph;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("k = {k} is invalid for {n} entities (need 1 <= k <= n)")]
    InvalidK { k: usize, n: usize },
    #[error("partitions cover {left} and {right} entities")]
    LengthMismatch { left: usize, right: usize },
    #[error("entity sets differ: `{0}` appears in only one labelling")]
    EntityMismatch(String),
}

/// One agglomeration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Average similarity between the two merged clusters.
    pub linkage: f64,
    pub new_cluster: usize,
    pub size: usize,
}

/// Merge history. Leaves are clusters `0..leaf_count`; the merge at step `s`
/// creates cluster `leaf_count + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaf_count: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// CSV `step,cluster_a,cluster_b,linkage,new_cluster,size`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,cluster_a,cluster_b,linkage,new_cluster,size\n");
        for (s, m) in self.merges.iter().enumerate() {
            let _ = writeln!(
                out,
                "{s},{},{},{},{},{}",
                m.a,
                m.b,
                sig12(m.linkage),
                m.new_cluster,
                m.size
            );
        }
        out
    }
}

fn link_key(s: f64) -> i64 {
    (s * 1e12).round() as i64
}

/// Agglomerates by highest average pairwise similarity until `k` clusters
/// remain. Pairs without an edge count as similarity 0. Ties go to the
/// lexicographically smallest pair of cluster ids.
pub fn hac_average_linkage(
    graph: &SimilarityGraph,
    k: usize,
) -> Result<(Dendrogram, Partition), BaselineError> {
    let n = graph.node_count();
    if k < 1 || k > n {
        return Err(BaselineError::InvalidK { k, n });
    }
    // sim[a][b] holds the average linkage between active slots a and b
    let mut sim = vec![vec![0.0f64; n]; n];
    for (a, b, w) in graph.edges() {
        sim[a][b] = w;
        sim[b][a] = w;
    }
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut slot_of_node: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - k);

    while active.len() > k {
        let mut best: Option<(i64, (usize, usize), usize, usize)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let key = link_key(sim[a][b]);
                let ids = {
                    let (p, q) = (cluster_id[a], cluster_id[b]);
                    (p.min(q), p.max(q))
                };
                let better = match best {
                    None => true,
                    Some((bk, bids, _, _)) => key > bk || (key == bk && ids < bids),
                };
                if better {
                    best = Some((key, ids, a, b));
                }
            }
        }
        let (_, (id_a, id_b), a, b) = best.expect("at least two active clusters");
        let linkage = sim[a][b];
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for &c in &active {
            if c != a && c != b {
                let s = (sa * sim[a][c] + sb * sim[b][c]) / (sa + sb);
                sim[a][c] = s;
                sim[c][a] = s;
            }
        }
        size[a] += size[b];
        let new_cluster = n + merges.len();
        merges.push(Merge {
            a: id_a,
            b: id_b,
            linkage,
            new_cluster,
            size: size[a],
        });
        cluster_id[a] = new_cluster;
        active.retain(|&c| c != b);
        for s in slot_of_node.iter_mut() {
            if *s == b {
                *s = a;
            }
        }
    }
    Ok((
        Dendrogram {
            leaf_count: n,
            merges,
        },
        Partition::from_labels(&slot_of_node),
    ))
}

fn comb2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two partitions of the same entities.
///
/// Returns 1.0 when both partitions are trivial in the same way (the index
/// and its expectation coincide at the maximum).
pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64, BaselineError> {
    if p.len() != q.len() {
        return Err(BaselineError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let n = p.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows = vec![0u64; p.cluster_count()];
    let mut cols = vec![0u64; q.cluster_count()];
    for (&a, &b) in p.labels().iter().zip(q.labels()) {
        *table.entry((a, b)).or_insert(0) += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// ARI between two `entity -> label` maps over the same entity set.
pub fn adjusted_rand_index_labels(
    predicted: &BTreeMap<String, String>,
    truth: &BTreeMap<String, String>,
) -> Result<f64, BaselineError> {
    if let Some(id) = predicted
        .keys()
        .find(|k| !truth.contains_key(*k))
        .or_else(|| truth.keys().find(|k| !predicted.contains_key(*k)))
    {
        return Err(BaselineError::EntityMismatch(id.clone()));
    }
    let p: Vec<&String> = predicted.values().collect();
    let q: Vec<&String> = truth.values().collect();
    adjusted_rand_index(&Partition::from_labels(&p), &Partition::from_labels(&q))
}

/// Cluster sizes mapped to how many clusters have that size.
pub fn size_histogram(p: &Partition) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for s in p.sizes() {
        *hist.entry(s).or_insert(0) += 1;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        SimilarityGraph::from_edges(
            (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect(),
            edges.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn forced_merge() {
        let g = labelled(3, &[(0, 1, 0.9), (0, 2, 0.1), (1, 2, 0.1)]);
        let (d, p) = hac_average_linkage(&g, 2).unwrap();
        assert_eq!(p, Partition::from_labels(&[0, 0, 1]));
        assert_eq!(d.merges.len(), 1);
        assert_eq!((d.merges[0].a, d.merges[0].b), (0, 1));
        assert_eq!(d.merges[0].linkage, 0.9);
    }

    #[test]
    fn average_linkage_update() {
        let g = labelled(3, &[(0, 1, 0.9), (0, 2, 0.4), (1, 2, 0.2)]);
        let (d, p) = hac_average_linkage(&g, 1).unwrap();
        assert_eq!(p.cluster_count(), 1);
        assert_eq!(d.merges.len(), 2);
        assert!((d.merges[1].linkage - 0.3).abs() < 1e-15);
        assert_eq!(d.merges[1].new_cluster, 4);
        assert_eq!((d.merges[1].a, d.merges[1].b), (2, 3));
        assert_eq!(d.merges[1].size, 3);
    }

    #[test]
    fn k_equal_n_is_singletons() {
        let g = labelled(4, &[(0, 1, 0.5)]);
        let (d, p) = hac_average_linkage(&g, 4).unwrap();
        assert!(d.merges.is_empty());
        assert_eq!(p.cluster_count(), 4);
    }

    #[test]
    fn invalid_k() {
        let g = labelled(2, &[]);
        assert_eq!(
            hac_average_linkage(&g, 0).unwrap_err(),
            BaselineError::InvalidK { k: 0, n: 2 }
        );
        assert!(hac_average_linkage(&g, 3).is_err());
    }

    #[test]
    fn identical_entities_merge_first() {
        let g = labelled(4, &[(0, 1, 0.3), (1, 2, 1.0), (2, 3, 0.6)]);
        let (d, _) = hac_average_linkage(&g, 1).unwrap();
        assert_eq!((d.merges[0].a, d.merges[0].b, d.merges[0].linkage), (1, 2, 1.0));
    }

    #[test]
    fn ari_examples() {
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        let q = Partition::from_labels(&[0, 1, 0, 1]);
        assert!((adjusted_rand_index(&p, &q).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
        let s = Partition::singletons(4);
        assert_eq!(adjusted_rand_index(&p, &s).unwrap(), 0.0);
        assert!(adjusted_rand_index(&p, &Partition::singletons(3)).is_err());
    }

    #[test]
    fn ari_from_label_maps() {
        let m = |pairs: &[(&str, &str)]| -> BTreeMap<String, String> {
            pairs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect()
        };
        let p = m(&[("1", "x"), ("2", "x"), ("3", "y"), ("4", "y")]);
        let q = m(&[("1", "a"), ("3", "a"), ("2", "b"), ("4", "b")]);
        assert!((adjusted_rand_index_labels(&p, &q).unwrap() + 0.5).abs() < 1e-12);
        let r = m(&[("9", "a")]);
        assert!(matches!(
            adjusted_rand_index_labels(&p, &r),
            Err(BaselineError::EntityMismatch(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn ari_symmetric_and_relabel_invariant(
            a in proptest::collection::vec(0usize..4, 2..30),
            seed in 0usize..4,
        ) {
            let b: Vec<usize> = a.iter().enumerate().map(|(i, &x)| (x + i * seed) % 3).collect();
            let p = Partition::from_labels(&a);
            let q = Partition::from_labels(&b);
            let pq = adjusted_rand_index(&p, &q).unwrap();
            let qp = adjusted_rand_index(&q, &p).unwrap();
            proptest::prop_assert!((pq - qp).abs() < 1e-12);
            proptest::prop_assert!(pq <= 1.0 + 1e-12);
            let relabelled: Vec<usize> = a.iter().map(|&x| 10 - x).collect();
            let p2 = Partition::from_labels(&relabelled);
            proptest::prop_assert!((adjusted_rand_index(&p2, &q).unwrap() - pq).abs() < 1e-12);
        }
    }
}
