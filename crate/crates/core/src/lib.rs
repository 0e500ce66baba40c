//! Clustering of network-constrained trajectories and road segments.
//!
//! Trajectories are bags of road segments weighted TF-IDF style; segments are
//! bags of trajectories weighted the same way in reverse. Cosine similarity
//! between those vectors defines a similarity graph, which is clustered by
//! recursive, significance-tested modularity optimization into a hierarchy of
//! nested clusters.
//!
//! ```text
//! RoadNetwork ─▶ Corpus ─▶ Vectorizer ─▶ SimilarityGraph ─▶ ClusterHierarchy
//! ```

pub mod baseline;
pub mod community;
pub mod corpus;
pub mod datagen;
pub mod format;
pub mod network;
pub mod similarity;
pub mod vectorizer;

pub use community::{
    hierarchical_cluster, modularity, optimize_partition, significance_test, ClusterHierarchy,
    NullModelConfig, Partition,
};
pub use corpus::{load_trajectories, Corpus, Trajectory};
pub use network::{load_network, RoadNetwork, Segment};
pub use similarity::{
    build_segment_graph, build_trajectory_graph, candidate_pairs, EntityKind, SegmentMode,
    SimilarityGraph,
};
pub use vectorizer::{cosine, Vectorizer, WeightVector};
