//! Seeded citation-network-shaped dataset generator.
//!
//! Produces graphs with the node/feature/class counts of the standard
//! citation benchmarks and the traits the bias experiments rely on.
//! Nodes are mostly homophilous, with a heterophilous minority whose
//! cross-class edges tilt toward a per-class "confuser" class. Features
//! are sparse bags of words with three ingredients per node:
//!
//! - stable topic words from the node's class block,
//! - uniform noise words,
//! - and, on heterophilous nodes, words from a small per-class "trend"
//!   block (interdisciplinary vocabulary).
//!
//! Trend words are only weakly class-associated in the population, but
//! the biased sampler concentrates the labeled set on heterophilous
//! nodes, which inflates their apparent reliability; a classifier fit
//! to such a set overloads the trend dimensions at the expense of the
//! stable topics. That is the spurious, selection-created correlation
//! between embedding dimensions that sample reweighting can remove.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::Dense;
use crate::graph::{DataSplit, Graph};

#[derive(Debug, Clone)]
pub struct CitationPreset {
    pub name: &'static str,
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub train_per_class: usize,
    /// Poisson mean of per-node edge stubs beyond the first.
    pub mean_extra_stubs: f64,
    /// Mean fraction of nodes with a heterophilous neighborhood. The
    /// per-class fraction ramps from 0.5x to 1.5x of this across the
    /// classes, so selection bias shifts the trend-word rates of the
    /// classes by different amounts.
    pub hetero_fraction: f64,
    /// Cross-class edge probability range for homophilous nodes.
    pub homo_mix: (f64, f64),
    /// Cross-class edge probability range for heterophilous nodes.
    pub hetero_mix: (f64, f64),
    /// Probability a cross-class edge goes to the class's confuser
    /// (class+1 mod C) instead of a uniformly random other class.
    pub confuser_tilt: f64,
    /// Poisson mean word count per document.
    pub words_per_doc: f64,
    /// Probability a word is drawn from the class topic block.
    pub topic_purity: f64,
    /// Scale of confuser-topic word contamination on heterophilous
    /// nodes (multiplied by the node's mixing propensity).
    pub word_confusion: f64,
    /// Feature dims of the shared trend block (interdisciplinary
    /// vocabulary, common to all classes).
    pub trend_block: usize,
    /// Poisson mean trend words on a trend-carrying node.
    pub trend_words: f64,
    /// Probability a homophilous node carries trend words anyway.
    pub trend_base_rate: f64,
}

/// Named presets shaped like the citation benchmarks, plus a tiny `toy`
/// preset for quick runs.
pub fn preset(name: &str) -> Option<CitationPreset> {
    match name {
        "cora" => Some(CitationPreset {
            name: "cora",
            num_nodes: 2708,
            num_features: 1433,
            num_classes: 7,
            val_size: 500,
            test_size: 1000,
            train_per_class: 20,
            mean_extra_stubs: 1.0,
            hetero_fraction: 0.3,
            homo_mix: (0.0, 0.15),
            hetero_mix: (0.55, 0.95),
            confuser_tilt: 0.7,
            words_per_doc: 18.0,
            topic_purity: 0.5,
            word_confusion: 0.5,
            trend_block: 12,
            trend_words: 5.0,
            trend_base_rate: 0.05,
        }),
        "citeseer" => Some(CitationPreset {
            name: "citeseer",
            num_nodes: 3327,
            num_features: 3703,
            num_classes: 6,
            val_size: 500,
            test_size: 1000,
            train_per_class: 20,
            mean_extra_stubs: 0.9,
            hetero_fraction: 0.4,
            homo_mix: (0.0, 0.15),
            hetero_mix: (0.6, 0.95),
            confuser_tilt: 0.75,
            words_per_doc: 16.0,
            topic_purity: 0.45,
            word_confusion: 0.0,
            trend_block: 40,
            trend_words: 8.0,
            trend_base_rate: 0.05,
        }),
        "pubmed" => Some(CitationPreset {
            name: "pubmed",
            num_nodes: 19717,
            num_features: 500,
            num_classes: 3,
            val_size: 500,
            test_size: 1000,
            train_per_class: 20,
            mean_extra_stubs: 1.25,
            hetero_fraction: 0.3,
            homo_mix: (0.0, 0.15),
            hetero_mix: (0.55, 0.9),
            confuser_tilt: 0.7,
            words_per_doc: 25.0,
            topic_purity: 0.5,
            word_confusion: 0.5,
            trend_block: 15,
            trend_words: 6.0,
            trend_base_rate: 0.05,
        }),
        "toy" => Some(CitationPreset {
            name: "toy",
            num_nodes: 240,
            num_features: 24,
            num_classes: 3,
            val_size: 40,
            test_size: 60,
            train_per_class: 10,
            mean_extra_stubs: 1.5,
            hetero_fraction: 0.3,
            homo_mix: (0.0, 0.15),
            hetero_mix: (0.55, 0.95),
            confuser_tilt: 0.7,
            words_per_doc: 6.0,
            topic_purity: 0.7,
            word_confusion: 0.5,
            trend_block: 3,
            trend_words: 3.0,
            trend_base_rate: 0.05,
        }),
        _ => None,
    }
}

fn poisson<R: Rng>(lambda: f64, rng: &mut R) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let l = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= l {
            return k;
        }
        k += 1;
    }
}

/// Generate a graph from the preset, seed-reproducibly.
pub fn generate_citation_graph(p: &CitationPreset, seed: u64) -> Graph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.num_nodes;
    let c = p.num_classes;

    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }

    // per-class heterophily fraction ramps across classes
    let hetero_of_class = |y: usize| -> f64 {
        let t = if c > 1 { y as f64 / (c - 1) as f64 } else { 0.5 };
        (p.hetero_fraction * (0.5 + t)).min(0.95)
    };
    let mixing: Vec<f64> = (0..n)
        .map(|i| {
            if rng.gen::<f64>() < hetero_of_class(labels[i]) {
                rng.gen_range(p.hetero_mix.0..p.hetero_mix.1)
            } else {
                rng.gen_range(p.homo_mix.0..p.homo_mix.1)
            }
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..n {
        let stubs = 1 + poisson(p.mean_extra_stubs, &mut rng);
        for _ in 0..stubs {
            let target_class = if rng.gen::<f64>() < mixing[i] {
                if rng.gen::<f64>() < p.confuser_tilt {
                    (labels[i] + 1) % c
                } else {
                    // a uniformly random class other than the node's own
                    let mut t = rng.gen_range(0..c - 1);
                    if t >= labels[i] {
                        t += 1;
                    }
                    t
                }
            } else {
                labels[i]
            };
            let pool = &by_class[target_class];
            for _ in 0..8 {
                let j = pool[rng.gen_range(0..pool.len())];
                if j != i {
                    edges.push((i, j));
                    break;
                }
            }
        }
    }

    // Feature layout: per-class topic blocks first, one shared trend
    // block at the top of the vocabulary, noise words anywhere.
    // Heterophilous nodes lightly contaminate their topic words toward
    // the confuser class and carry trend-block words.
    assert!(p.trend_block < p.num_features, "trend block exceeds vocabulary");
    let block = (p.num_features - p.trend_block) / c;
    let trend_start = p.num_features - p.trend_block;
    let mut features = Dense::<f64>::zeros(n, p.num_features);
    for i in 0..n {
        let words = 1 + poisson(p.words_per_doc - 1.0, &mut rng);
        for _ in 0..words {
            let dim = if rng.gen::<f64>() < p.topic_purity {
                let topic_class = if rng.gen::<f64>() < p.word_confusion * mixing[i] {
                    (labels[i] + 1) % c
                } else {
                    labels[i]
                };
                topic_class * block + rng.gen_range(0..block)
            } else {
                rng.gen_range(0..p.num_features)
            };
            features.set(i, dim, 1.0);
        }
        let carries_trend = mixing[i] >= 0.5 || rng.gen::<f64>() < p.trend_base_rate;
        if carries_trend && p.trend_block > 0 {
            let k = 1 + poisson(p.trend_words - 1.0, &mut rng);
            for _ in 0..k {
                let dim = trend_start + rng.gen_range(0..p.trend_block);
                features.set(i, dim, 1.0);
            }
        }
    }

    // canonical split: random val/test, then the first train_per_class
    // remaining nodes of each class (an unbiased labeled set)
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let mut val: Vec<usize> = order[..p.val_size].to_vec();
    let mut test: Vec<usize> = order[p.val_size..p.val_size + p.test_size].to_vec();
    let mut train = Vec::new();
    let mut counts = vec![0usize; c];
    for &i in &order[p.val_size + p.test_size..] {
        if counts[labels[i]] < p.train_per_class {
            counts[labels[i]] += 1;
            train.push(i);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Graph::from_edges(
        n,
        c,
        &edges,
        features,
        labels,
        DataSplit { train, val, test },
    )
    .expect("generated graph satisfies the invariants")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cora_preset_has_table_shape() {
        let p = preset("cora").unwrap();
        let g = generate_citation_graph(&p, 0);
        assert_eq!(g.num_nodes, 2708);
        assert_eq!(g.features.cols(), 1433);
        assert_eq!(g.num_classes, 7);
        assert_eq!(g.split.train.len(), 140);
        assert_eq!(g.split.val.len(), 500);
        assert_eq!(g.split.test.len(), 1000);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = preset("toy").unwrap();
        let a = generate_citation_graph(&p, 5);
        let b = generate_citation_graph(&p, 5);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.adjacency, b.adjacency);
        assert_eq!(a.split, b.split);
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(preset("nell").is_none());
    }

    #[test]
    fn ratios_spread_between_homophilous_and_heterophilous_nodes() {
        let p = preset("toy").unwrap();
        let g = generate_citation_graph(&p, 1);
        let r = crate::bias::neighbor_label_ratio(&g);
        let high = r.iter().filter(|&&x| x > 0.5).count();
        let low = r.iter().filter(|&&x| x < 0.2).count();
        assert!(high > g.num_nodes / 10, "too few heterophilous nodes: {high}");
        assert!(low > g.num_nodes / 3, "too few homophilous nodes: {low}");
    }
}
