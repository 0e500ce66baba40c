//! Recursive, significance-tested clustering: split a graph at its best
//! partition when that partition beats the null model, then repeat on every
//! cluster's induced subgraph.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    derive_seed, optimize_partition_with, significance_test, CommunityError, NullModelConfig,
    NullStatistics, Partition,
};
use crate::format::round12;
use crate::similarity::SimilarityGraph;

/// Why a hierarchy node was (or was not) split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Split into its children.
    Significant,
    /// Best partition did not beat the null model.
    NotSignificant,
    /// Best partition was a single community.
    SingleCommunity,
    /// Subgraph has no edges.
    Edgeless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Indices into the clustered graph, ascending.
    pub members: Vec<usize>,
    pub children: Vec<usize>,
    /// Modularity of the best partition found for this node's subgraph.
    pub modularity: Option<f64>,
    /// Cluster count of that partition.
    pub cluster_count: Option<usize>,
    pub null: Option<NullStatistics>,
    pub verdict: Verdict,
}

impl HierarchyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Tree of nested clusters. Node 0 is the root; nodes are in depth-first
/// pre-order with children in cluster-label order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHierarchy {
    ids: Vec<String>,
    nodes: Vec<HierarchyNode>,
}

struct Subtree {
    members: Vec<usize>,
    modularity: Option<f64>,
    cluster_count: Option<usize>,
    null: Option<NullStatistics>,
    verdict: Verdict,
    children: Vec<Subtree>,
}

/// Builds the full hierarchy for `graph`.
pub fn hierarchical_cluster(
    graph: &SimilarityGraph,
    config: &NullModelConfig,
) -> Result<ClusterHierarchy, CommunityError> {
    config.validate()?;
    let members: Vec<usize> = (0..graph.node_count()).collect();
    let tree = split(graph, members, config.seed, config)?;
    let mut nodes = Vec::new();
    flatten(tree, None, 0, &mut nodes);
    Ok(ClusterHierarchy {
        ids: graph.ids().to_vec(),
        nodes,
    })
}

fn split(
    graph: &SimilarityGraph,
    members: Vec<usize>,
    seed: u64,
    config: &NullModelConfig,
) -> Result<Subtree, CommunityError> {
    let leaf = |members, modularity, cluster_count, null, verdict| Subtree {
        members,
        modularity,
        cluster_count,
        null,
        verdict,
        children: Vec::new(),
    };
    if graph.edge_count() == 0 {
        return Ok(leaf(members, None, None, None, Verdict::Edgeless));
    }
    let (partition, q) = optimize_partition_with(graph, seed, &config.optimizer)?;
    if partition.cluster_count() < 2 {
        return Ok(leaf(
            members,
            Some(q),
            Some(1),
            None,
            Verdict::SingleCommunity,
        ));
    }
    let node_config = NullModelConfig {
        seed: derive_seed(seed, u64::MAX),
        ..config.clone()
    };
    let test = significance_test(graph, q, &node_config)?;
    let k = partition.cluster_count();
    if !test.significant {
        return Ok(leaf(
            members,
            Some(q),
            Some(k),
            Some(test.stats),
            Verdict::NotSignificant,
        ));
    }

    let children = partition
        .clusters()
        .into_par_iter()
        .enumerate()
        .map(|(c, local)| {
            let sub = graph
                .induced_subgraph_idx(&local)
                .expect("cluster members are valid graph nodes");
            let global = local.iter().map(|&i| members[i]).collect();
            split(&sub, global, derive_seed(seed, c as u64), config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Subtree {
        members,
        modularity: Some(q),
        cluster_count: Some(k),
        null: Some(test.stats),
        verdict: Verdict::Significant,
        children,
    })
}

fn flatten(tree: Subtree, parent: Option<usize>, depth: usize, out: &mut Vec<HierarchyNode>) -> usize {
    let id = out.len();
    out.push(HierarchyNode {
        id,
        parent,
        depth,
        members: tree.members,
        children: Vec::new(),
        modularity: tree.modularity,
        cluster_count: tree.cluster_count,
        null: tree.null,
        verdict: tree.verdict,
    });
    for child in tree.children {
        let child_id = flatten(child, Some(id), depth + 1, out);
        out[id].children.push(child_id);
    }
    id
}

#[derive(Serialize)]
struct NodeView<'a> {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    children: &'a [usize],
    size: usize,
    members: Vec<&'a str>,
    observed_q: Option<f64>,
    cluster_count: Option<usize>,
    verdict: Verdict,
    null: Option<NullView>,
}

#[derive(Serialize)]
struct NullView {
    samples: usize,
    mean: Option<f64>,
    std_dev: Option<f64>,
    threshold: Option<f64>,
    observed_q: f64,
    null_modularities: Vec<f64>,
}

#[derive(Serialize)]
struct HierarchyView<'a> {
    entity_count: usize,
    levels: usize,
    leaf_count: usize,
    nodes: Vec<NodeView<'a>>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then(|| round12(x))
}

impl ClusterHierarchy {
    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn root(&self) -> &HierarchyNode {
        &self.nodes[0]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn leaves(&self) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Depth of the deepest node; 0 when the root is a leaf.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Number of levels below the root.
    pub fn levels(&self) -> usize {
        self.depth()
    }

    /// Nodes at exactly `depth`.
    pub fn level(&self, depth: usize) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter().filter(move |n| n.depth == depth)
    }

    /// Flat partition formed by the nodes at `depth`, with leaves above that
    /// depth standing in for their own descendants.
    pub fn cut_at_depth(&self, depth: usize) -> Partition {
        let mut labels = vec![0usize; self.ids.len()];
        for node in &self.nodes {
            if node.depth == depth || (node.depth < depth && node.is_leaf()) {
                for &m in &node.members {
                    labels[m] = node.id;
                }
            }
        }
        Partition::from_labels(&labels)
    }

    /// Partition into leaf clusters.
    pub fn leaf_partition(&self) -> Partition {
        self.cut_at_depth(self.depth())
    }

    /// `entity_id,cluster_label` rows for the cut at `depth`.
    pub fn cut_csv(&self, depth: usize) -> String {
        let p = self.cut_at_depth(depth);
        crate::format::write_labels(
            "entity_id,cluster_label",
            self.ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), p.label(i).to_string())),
        )
    }

    /// JSON document describing every node.
    pub fn to_json(&self) -> String {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeView {
                id: n.id,
                parent: n.parent,
                depth: n.depth,
                children: &n.children,
                size: n.members.len(),
                members: n.members.iter().map(|&m| self.ids[m].as_str()).collect(),
                observed_q: n.modularity.and_then(finite),
                cluster_count: n.cluster_count,
                verdict: n.verdict,
                null: n.null.as_ref().map(|s| NullView {
                    samples: s.samples,
                    mean: finite(s.mean),
                    std_dev: finite(s.std_dev),
                    threshold: finite(s.threshold),
                    observed_q: round12(s.observed),
                    null_modularities: s.null_modularities.iter().map(|&q| round12(q)).collect(),
                }),
            })
            .collect();
        let view = HierarchyView {
            entity_count: self.ids.len(),
            levels: self.levels(),
            leaf_count: self.leaves().count(),
            nodes,
        };
        serde_json::to_string_pretty(&view).expect("hierarchy serializes") + "\n"
    }
}
