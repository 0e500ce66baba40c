use super::{CommunityError, Partition};
use crate::similarity::SimilarityGraph;

/// Newman modularity of `partition` on `graph`:
///
/// `Q = 1/2m · Σ_k Σ_{i,j ∈ C_k} (w_ij − d_i d_j / 2m)`
///
/// summed over ordered pairs including `i = j` (with `w_ii = 0`), which
/// makes the all-in-one partition score exactly zero.
pub fn modularity(graph: &SimilarityGraph, partition: &Partition) -> Result<f64, CommunityError> {
    check(graph, partition)?;
    let two_m = graph.two_m();
    let k = partition.cluster_count();
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for i in 0..graph.node_count() {
        let c = partition.label(i);
        let inside: f64 = graph
            .neighbors(i)
            .iter()
            .filter(|&&(j, _)| partition.label(j) == c)
            .map(|&(_, w)| w)
            .sum();
        internal[c] += inside;
        total[c] += graph.degree(i);
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(&inside, &tot)| inside / two_m - (tot / two_m) * (tot / two_m))
        .sum())
}

/// Direct double loop over all ordered node pairs. Quadratic; intended as a
/// cross-check for [`modularity`] on small graphs.
pub fn modularity_reference(
    graph: &SimilarityGraph,
    partition: &Partition,
) -> Result<f64, CommunityError> {
    check(graph, partition)?;
    let n = graph.node_count();
    let two_m = graph.two_m();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if partition.label(i) == partition.label(j) {
                q += graph.weight(i, j) - graph.degree(i) * graph.degree(j) / two_m;
            }
        }
    }
    Ok(q / two_m)
}

fn check(graph: &SimilarityGraph, partition: &Partition) -> Result<(), CommunityError> {
    if partition.len() != graph.node_count() {
        return Err(CommunityError::SizeMismatch {
            partition: partition.len(),
            graph: graph.node_count(),
        });
    }
    if graph.edge_count() == 0 || graph.two_m() <= 0.0 {
        return Err(CommunityError::Edgeless);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        SimilarityGraph::from_edges((0..n).map(|i| i.to_string()).collect(), edges.to_vec())
            .unwrap()
    }

    #[test]
    fn single_edge_singletons() {
        let g = graph(2, &[(0, 1, 1.0)]);
        let q = modularity(&g, &Partition::singletons(2)).unwrap();
        assert!((q + 0.5).abs() < 1e-15);
        assert_eq!(modularity(&g, &Partition::all_in_one(2)).unwrap(), 0.0);
    }

    #[test]
    fn edgeless_and_size_errors() {
        let g = graph(3, &[]);
        assert_eq!(
            modularity(&g, &Partition::all_in_one(3)),
            Err(CommunityError::Edgeless)
        );
        let g = graph(3, &[(0, 1, 1.0)]);
        assert!(matches!(
            modularity(&g, &Partition::all_in_one(2)),
            Err(CommunityError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn complete_graph_even_split() {
        let edges: Vec<_> = (0..4)
            .flat_map(|a| (a + 1..4).map(move |b| (a, b, 1.0)))
            .collect();
        let g = graph(4, &edges);
        let q = modularity(&g, &Partition::from_labels(&[0, 0, 1, 1])).unwrap();
        assert!((q + 1.0 / 6.0).abs() < 1e-15);
    }
}
