//! Significance of an observed modularity against randomized graphs that
//! keep the degree sequence (double-edge swaps) and the multiset of edge
//! weights (shuffled onto the rewired edges).

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{derive_seed, optimize_partition_with, CommunityError, OptimizerConfig};
use crate::similarity::SimilarityGraph;

/// Observed Q must beat the threshold by more than this to count.
const SIGNIFICANCE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullModelConfig {
    /// R, number of randomized graphs per test.
    pub samples: usize,
    /// Observed Q must exceed this quantile of the null optima.
    pub quantile: f64,
    pub seed: u64,
    /// Swap attempts per edge when rewiring.
    pub swaps_per_edge: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for NullModelConfig {
    fn default() -> Self {
        Self {
            samples: 30,
            quantile: 0.95,
            seed: 0x5EED,
            swaps_per_edge: 10,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl NullModelConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CommunityError> {
        if self.samples < 1 {
            return Err(CommunityError::InvalidConfig("sample count must be >= 1".into()));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(CommunityError::InvalidConfig(format!(
                "quantile {} not in (0, 1)",
                self.quantile
            )));
        }
        Ok(())
    }
}

/// Summary of the null distribution used for one verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullStatistics {
    pub samples: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// The configured quantile of the null optima.
    pub threshold: f64,
    pub observed: f64,
    pub null_modularities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Significance {
    pub significant: bool,
    pub stats: NullStatistics,
}

/// Quantile of `values` by linear interpolation between order statistics
/// (position `(n − 1)·q`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Degree-preserving randomization of `graph`.
///
/// Performs `swaps_per_edge · |E|` double-edge swap attempts, rejecting any
/// swap that would create a self-loop or a parallel edge, then assigns the
/// original edge weights to the rewired edges in random order.
pub fn rewire<R: Rng>(graph: &SimilarityGraph, swaps_per_edge: usize, rng: &mut R) -> SimilarityGraph {
    let mut edges: Vec<(usize, usize)> = graph.edges().map(|(a, b, _)| (a, b)).collect();
    let mut weights: Vec<f64> = graph.edges().map(|(_, _, w)| w).collect();
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));

    if edges.len() >= 2 {
        for _ in 0..swaps_per_edge * edges.len() {
            let i = rng.gen_range(0..edges.len());
            let j = rng.gen_range(0..edges.len());
            if i == j {
                continue;
            }
            let (a, b) = edges[i];
            let (mut c, mut d) = edges[j];
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut c, &mut d);
            }
            // (a,b),(c,d) -> (a,d),(c,b)
            if a == d || c == b {
                continue;
            }
            let (e1, e2) = (key(a, d), key(c, b));
            if e1 == e2 || present.contains(&e1) || present.contains(&e2) {
                continue;
            }
            present.remove(&edges[i]);
            present.remove(&edges[j]);
            present.insert(e1);
            present.insert(e2);
            edges[i] = e1;
            edges[j] = e2;
        }
    }
    weights.shuffle(rng);
    SimilarityGraph::from_edges(
        graph.ids().to_vec(),
        edges.into_iter().zip(weights).map(|((a, b), w)| (a, b, w)),
    )
    .expect("rewiring keeps the graph simple")
}

/// Compares `observed_q` with the optimized modularity of `config.samples`
/// randomized versions of `graph`.
///
/// Graphs with fewer than two edges cannot be rewired and are reported as
/// not significant with an empty null sample.
pub fn significance_test(
    graph: &SimilarityGraph,
    observed_q: f64,
    config: &NullModelConfig,
) -> Result<Significance, CommunityError> {
    config.validate()?;
    if graph.edge_count() < 2 {
        return Ok(Significance {
            significant: false,
            stats: NullStatistics {
                samples: 0,
                mean: f64::NAN,
                std_dev: f64::NAN,
                threshold: f64::NAN,
                observed: observed_q,
                null_modularities: Vec::new(),
            },
        });
    }
    let nulls: Vec<f64> = (0..config.samples)
        .into_par_iter()
        .map(|k| {
            let sample_seed = derive_seed(config.seed, k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
            let random = rewire(graph, config.swaps_per_edge, &mut rng);
            optimize_partition_with(&random, sample_seed, &config.optimizer).map(|(_, q)| q)
        })
        .collect::<Result<_, _>>()?;

    let r = nulls.len() as f64;
    let mean = nulls.iter().sum::<f64>() / r;
    let var = nulls.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / r;
    let threshold = quantile(&nulls, config.quantile);
    Ok(Significance {
        significant: observed_q - threshold > SIGNIFICANCE_MARGIN,
        stats: NullStatistics {
            samples: nulls.len(),
            mean,
            std_dev: var.sqrt(),
            threshold,
            observed: observed_q,
            null_modularities: nulls,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        SimilarityGraph::from_edges((0..n).map(|i| i.to_string()).collect(), edges.to_vec())
            .unwrap()
    }

    #[test]
    fn quantile_interpolates() {
        let v: Vec<f64> = (0..11).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.5), 5.0);
        assert!((quantile(&v, 0.95) - 9.5).abs() < 1e-12);
        assert_eq!(quantile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn rewiring_preserves_degrees_and_weights() {
        let edges: Vec<_> = (0..12)
            .map(|i| (i, (i + 1) % 12, 0.1 * (i + 1) as f64))
            .chain((0..6).map(|i| (i, i + 6, 1.0)))
            .collect();
        let g = graph(12, &edges);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = rewire(&g, 10, &mut rng);
        assert_eq!(r.edge_count(), g.edge_count());
        for i in 0..12 {
            assert_eq!(r.neighbors(i).len(), g.neighbors(i).len());
        }
        let mut a: Vec<f64> = g.edges().map(|e| e.2).collect();
        let mut b: Vec<f64> = r.edges().map(|e| e.2).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert!((r.two_m() - g.two_m()).abs() < 1e-12);
    }

    #[test]
    fn tiny_graphs_not_significant() {
        let g = graph(2, &[(0, 1, 1.0)]);
        let s = significance_test(&g, 0.0, &NullModelConfig::default()).unwrap();
        assert!(!s.significant);
        assert_eq!(s.stats.samples, 0);
    }

    #[test]
    fn invalid_config_rejected() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let cfg = NullModelConfig {
            samples: 0,
            ..NullModelConfig::default()
        };
        assert!(significance_test(&g, 0.0, &cfg).is_err());
        let cfg = NullModelConfig {
            samples: 3,
            quantile: 1.0,
            ..NullModelConfig::default()
        };
        assert!(significance_test(&g, 0.0, &cfg).is_err());
    }

    #[test]
    fn verdict_is_reproducible() {
        let edges: Vec<_> = (0..10)
            .flat_map(|a| (a + 1..10).map(move |b| (a, b)))
            .filter(|&(a, b)| (a < 5) == (b < 5) || (a + b) % 7 == 0)
            .map(|(a, b)| (a, b, 1.0))
            .collect();
        let g = graph(10, &edges);
        let cfg = NullModelConfig::with_seed(4);
        let a = significance_test(&g, 0.4, &cfg).unwrap();
        let b = significance_test(&g, 0.4, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
