//! Biased and small-sample label selection on the masked training graph.
//!
//! The biased selector scores every node by its neighbor disagreement
//! ratio `r_i = |{j ∈ N_i : y_j ≠ y_i}| / |N_i|`, thresholds at the mean
//! ratio, and accepts nodes with probability `ε` above the threshold and
//! `1 − ε` below it, cycling through each class until the per-class quota
//! is met. Larger `ε` tilts the labeled set toward nodes whose
//! neighborhoods disagree with them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Configuration of the biased selector.
#[derive(Debug, Clone)]
pub struct BiasConfig {
    /// Selection bias degree, strictly inside (0.5, 1).
    pub epsilon: f64,
    /// Nodes to select per class.
    pub per_class: usize,
    pub seed: u64,
}

impl BiasConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.5 && self.epsilon < 1.0) {
            return Err(Error::Validation(format!(
                "epsilon must lie strictly inside (0.5, 1), got {}",
                self.epsilon
            )));
        }
        if self.per_class == 0 {
            return Err(Error::Validation("per_class must be positive".into()));
        }
        Ok(())
    }
}

/// Fraction of each node's neighbors whose label differs from its own,
/// computed on the (already masked) training graph. Isolated nodes get 0.
pub fn neighbor_label_ratio<T: Scalar>(training_graph: &Graph<T>) -> Vec<f64> {
    (0..training_graph.num_nodes)
        .map(|i| {
            let neigh = training_graph.neighbors(i);
            if neigh.is_empty() {
                return 0.0;
            }
            let differing = neigh
                .iter()
                .filter(|&&j| training_graph.labels[j] != training_graph.labels[i])
                .count();
            differing as f64 / neigh.len() as f64
        })
        .collect()
}

/// Per-node selection probability: `ε` when `r ≥ t`, `1 − ε` otherwise.
pub fn selection_probability(r: f64, threshold: f64, epsilon: f64) -> f64 {
    if r >= threshold {
        epsilon
    } else {
        1.0 - epsilon
    }
}

/// Select `per_class` labeled nodes per class with the ε-Bernoulli rule.
///
/// Per class, candidates are shuffled once by seed and walked repeatedly,
/// accepting each unselected node with its Bernoulli probability, until
/// the quota is met. Returns sorted node ids of the training graph.
pub fn biased_label_select<T: Scalar>(
    training_graph: &Graph<T>,
    cfg: &BiasConfig,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let ratios = neighbor_label_ratio(training_graph);
    let threshold = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut selected = Vec::with_capacity(cfg.per_class * training_graph.num_classes);
    for class in 0..training_graph.num_classes {
        let mut candidates: Vec<usize> = (0..training_graph.num_nodes)
            .filter(|&i| training_graph.labels[i] == class)
            .collect();
        if candidates.len() < cfg.per_class {
            return Err(Error::ClassQuota {
                class,
                have: candidates.len(),
                need: cfg.per_class,
            });
        }
        candidates.shuffle(&mut rng);
        let mut taken = vec![false; candidates.len()];
        let mut count = 0;
        while count < cfg.per_class {
            for (k, &node) in candidates.iter().enumerate() {
                if count == cfg.per_class {
                    break;
                }
                if taken[k] {
                    continue;
                }
                let p = selection_probability(ratios[node], threshold, cfg.epsilon);
                if rng.gen::<f64>() < p {
                    taken[k] = true;
                    selected.push(node);
                    count += 1;
                }
            }
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Uniformly select up to `k_per_class` nodes per class, seed-reproducibly.
/// Classes smaller than `k_per_class` are taken whole.
pub fn small_sample_select<T: Scalar>(
    training_graph: &Graph<T>,
    k_per_class: usize,
    seed: u64,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for class in 0..training_graph.num_classes {
        let mut candidates: Vec<usize> = (0..training_graph.num_nodes)
            .filter(|&i| training_graph.labels[i] == class)
            .collect();
        candidates.shuffle(&mut rng);
        candidates.truncate(k_per_class);
        selected.extend(candidates);
    }
    selected.sort_unstable();
    selected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Dense;
    use crate::graph::DataSplit;

    fn labeled_graph(n: usize, edges: &[(usize, usize)], labels: Vec<usize>) -> Graph<f64> {
        let classes = labels.iter().max().map_or(1, |&m| m + 1);
        Graph::from_edges(
            n,
            classes,
            edges,
            Dense::zeros(n, 2),
            labels,
            DataSplit::default(),
        )
        .unwrap()
    }

    #[test]
    fn ratio_hand_example() {
        // node 0 (label 0) has neighbor labels {0, 1, 1} -> r = 2/3
        let g = labeled_graph(4, &[(0, 1), (0, 2), (0, 3)], vec![0, 0, 1, 1]);
        let r = neighbor_label_ratio(&g);
        assert!((r[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_agreeing_neighbors_is_zero() {
        let g = labeled_graph(3, &[(0, 1), (0, 2)], vec![1, 1, 1]);
        assert_eq!(neighbor_label_ratio(&g)[0], 0.0);
    }

    #[test]
    fn ratio_isolated_node_is_zero() {
        let g = labeled_graph(3, &[(1, 2)], vec![0, 1, 0]);
        assert_eq!(neighbor_label_ratio(&g)[0], 0.0);
    }

    #[test]
    fn epsilon_boundaries_rejected() {
        for eps in [0.5, 1.0, 0.2, 1.3] {
            let cfg = BiasConfig {
                epsilon: eps,
                per_class: 1,
                seed: 0,
            };
            assert!(cfg.validate().is_err(), "epsilon {eps} should be rejected");
        }
        let ok = BiasConfig {
            epsilon: 0.9,
            per_class: 1,
            seed: 0,
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn quota_error_names_the_class() {
        let g = labeled_graph(3, &[], vec![0, 0, 1]);
        let cfg = BiasConfig {
            epsilon: 0.7,
            per_class: 2,
            seed: 1,
        };
        match biased_label_select(&g, &cfg) {
            Err(Error::ClassQuota { class, have, need }) => {
                assert_eq!((class, have, need), (1, 1, 2));
            }
            other => panic!("expected quota error, got {other:?}"),
        }
    }

    #[test]
    fn selection_is_deterministic_in_seed() {
        let g = ring_graph(60, 3);
        let cfg = BiasConfig {
            epsilon: 0.8,
            per_class: 5,
            seed: 42,
        };
        let a = biased_label_select(&g, &cfg).unwrap();
        let b = biased_label_select(&g, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
    }

    /// Ring of n nodes with labels striped over `classes`; adjacent nodes
    /// mostly disagree, so ratios vary with the stripe layout.
    fn ring_graph(n: usize, classes: usize) -> Graph<f64> {
        let labels: Vec<usize> = (0..n).map(|i| (i / 4) % classes).collect();
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let c = labels.iter().max().unwrap() + 1;
        Graph::from_edges(n, c, &edges, Dense::zeros(n, 2), labels, DataSplit::default())
            .unwrap()
    }

    #[test]
    fn bernoulli_acceptance_rate_matches_epsilon() {
        // Monte-Carlo estimate of the accept rate for a node with r >= t
        // under epsilon = 0.9, drawn through the same RNG type the
        // selector uses.
        let epsilon = 0.9;
        let p = selection_probability(0.8, 0.3, epsilon);
        assert_eq!(p, epsilon);
        let mut hits = 0usize;
        let trials = 10_000;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            if rng.gen::<f64>() < p {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!(
            (0.88..=0.92).contains(&freq),
            "acceptance frequency {freq} outside [0.88, 0.92]"
        );
        assert_eq!(selection_probability(0.1, 0.3, epsilon), 1.0 - epsilon);
        // boundary r == t gets the high-probability branch
        assert_eq!(selection_probability(0.3, 0.3, epsilon), epsilon);
    }

    #[test]
    fn heavier_bias_raises_mean_ratio_of_selected_nodes() {
        let g = ring_graph(120, 3);
        let ratios = neighbor_label_ratio(&g);
        let mean = |ids: &[usize]| ids.iter().map(|&i| ratios[i]).sum::<f64>() / ids.len() as f64;
        let mut biased_sum = 0.0;
        let mut random_sum = 0.0;
        let runs = 100;
        for seed in 0..runs {
            let cfg = BiasConfig {
                epsilon: 0.9,
                per_class: 8,
                seed,
            };
            biased_sum += mean(&biased_label_select(&g, &cfg).unwrap());
            random_sum += mean(&small_sample_select(&g, 8, seed));
        }
        assert!(
            biased_sum / runs as f64 > random_sum / runs as f64,
            "biased selection should concentrate on high-ratio nodes"
        );
    }

    #[test]
    fn small_sample_k1_takes_one_per_class() {
        let g = labeled_graph(9, &[], vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
        let sel = small_sample_select(&g, 1, 7);
        assert_eq!(sel.len(), 3);
        let classes: std::collections::BTreeSet<usize> =
            sel.iter().map(|&i| g.labels[i]).collect();
        assert_eq!(classes.len(), 3);
    }

    #[test]
    fn small_sample_oversized_k_takes_whole_class() {
        let g = labeled_graph(4, &[], vec![0, 0, 0, 1]);
        let sel = small_sample_select(&g, 3, 0);
        assert_eq!(sel.iter().filter(|&&i| g.labels[i] == 1).count(), 1);
        assert_eq!(sel.iter().filter(|&&i| g.labels[i] == 0).count(), 3);
    }

    #[test]
    fn small_sample_deterministic() {
        let g = ring_graph(40, 2);
        assert_eq!(small_sample_select(&g, 4, 9), small_sample_select(&g, 4, 9));
    }
}
