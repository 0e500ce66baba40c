//! Modularity-based community detection: the quality function, a
//! merge-and-refine optimizer, a degree-preserving null model for
//! significance testing and the recursive cluster hierarchy built on them.

mod hierarchy;
mod modularity;
mod null_model;
mod optimizer;

pub use hierarchy::{hierarchical_cluster, ClusterHierarchy, HierarchyNode, Verdict};
pub use modularity::{modularity, modularity_reference};
pub use null_model::{
    quantile, rewire, significance_test, NullModelConfig, NullStatistics, Significance,
};
pub use optimizer::{
    has_improving_move, optimize_partition, optimize_partition_with, OptimizerConfig,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CommunityError {
    #[error("modularity is undefined on a graph without edges")]
    Edgeless,
    #[error("partition covers {partition} nodes but the graph has {graph}")]
    SizeMismatch { partition: usize, graph: usize },
    #[error("invalid null-model configuration: {0}")]
    InvalidConfig(String),
}

/// Assignment of every graph node to one of `K` clusters labelled `0..K`.
///
/// Labels are normalized by first appearance, so two partitions with the
/// same blocks compare equal regardless of the labels they were built with.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    count: usize,
}

impl Partition {
    pub fn from_labels<L: Ord + Clone>(labels: &[L]) -> Self {
        let mut seen = std::collections::BTreeMap::new();
        let labels = labels
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(l.clone()).or_insert(next)
            })
            .collect();
        Self {
            labels,
            count: seen.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            count: n,
        }
    }

    pub fn all_in_one(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            count: usize::from(n > 0),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    /// K, the number of clusters.
    pub fn cluster_count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member lists per cluster, each sorted ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.count];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }
}

// splitmix64 finalizer; derives independent sub-seeds from (seed, index).
pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
