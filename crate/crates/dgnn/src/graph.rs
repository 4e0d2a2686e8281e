//! Graph storage, adjacency normalization, and the inductive masking
//! protocol.
//!
//! `Graph` holds an undirected, unweighted adjacency (CSR, no stored
//! self-loops), dense node features, one integer label per node, and the
//! train/val/test split. Everything is immutable after construction and
//! safe to share across threads.

use std::collections::BTreeSet;

use crate::dense::Dense;
use crate::scalar::Scalar;
use crate::sparse::Csr;
use crate::{Error, Result};

/// Train/validation/test index sets. Pairwise disjoint, all in range.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (name, ids) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            for &i in ids.iter() {
                if i >= num_nodes {
                    return Err(Error::Validation(format!(
                        "split {name} contains node id {i} >= num_nodes {num_nodes}"
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::Validation(format!(
                        "split sets are not disjoint: node {i} appears twice"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Undirected graph with features, labels and a split.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    pub num_nodes: usize,
    pub num_classes: usize,
    /// Symmetric binary adjacency, no self-loops stored.
    pub adjacency: Csr<T>,
    /// Dense node features, one row per node.
    pub features: Dense<T>,
    /// One class index per node, values in `[0, num_classes)`.
    pub labels: Vec<usize>,
    pub split: DataSplit,
}

impl<T: Scalar> Graph<T> {
    /// Build a graph from an undirected edge list. Edges are symmetrized
    /// and deduplicated; self-loops are dropped.
    pub fn from_edges(
        num_nodes: usize,
        num_classes: usize,
        edges: &[(usize, usize)],
        features: Dense<T>,
        labels: Vec<usize>,
        split: DataSplit,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                num_nodes
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::Validation(format!(
                "label vector has {} entries for {} nodes",
                labels.len(),
                num_nodes
            )));
        }
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::Validation(format!(
                    "node {i} has label {y} outside [0, {num_classes})"
                )));
            }
        }
        split.validate(num_nodes)?;

        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::Validation(format!(
                    "edge ({a},{b}) references a node outside [0, {num_nodes})"
                )));
            }
            if a == b {
                continue;
            }
            set.insert((a, b));
            set.insert((b, a));
        }
        let entries: Vec<(usize, usize, T)> =
            set.into_iter().map(|(a, b)| (a, b, T::one())).collect();
        let adjacency = Csr::from_sorted_entries(num_nodes, num_nodes, &entries);

        Ok(Graph {
            num_nodes,
            num_classes,
            adjacency,
            features,
            labels,
            split,
        })
    }

    /// Neighbor ids of a node (no self).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adjacency.row(i).0
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Same graph with a different training index set.
    pub fn with_train_idx(&self, train: Vec<usize>) -> Result<Self> {
        let mut g = self.clone();
        g.split.train = train;
        g.split.validate(g.num_nodes)?;
        Ok(g)
    }
}

/// Symmetric degree-normalized adjacency with self-loops,
/// `D̃^{-1/2}(A+I)D̃^{-1/2}`.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency<T> {
    pub matrix: Csr<T>,
}

/// Compute `D̃^{-1/2}(A+I)D̃^{-1/2}` where `D̃` is the degree of `A+I`.
/// Isolated nodes get degree 1 from the self-loop.
pub fn normalize_adjacency<T: Scalar>(graph: &Graph<T>) -> NormalizedAdjacency<T> {
    let n = graph.num_nodes;
    let inv_sqrt_deg: Vec<T> = (0..n)
        .map(|i| {
            let deg = graph.neighbors(i).len() + 1;
            T::one() / T::from_f64_lossy(deg as f64).sqrt()
        })
        .collect();
    let mut entries = Vec::with_capacity(graph.adjacency.nnz() + n);
    for i in 0..n {
        let (cols, _) = graph.adjacency.row(i);
        let mut placed_diag = false;
        for &j in cols {
            if !placed_diag && j > i {
                entries.push((i, i, inv_sqrt_deg[i] * inv_sqrt_deg[i]));
                placed_diag = true;
            }
            entries.push((i, j, inv_sqrt_deg[i] * inv_sqrt_deg[j]));
        }
        if !placed_diag {
            entries.push((i, i, inv_sqrt_deg[i] * inv_sqrt_deg[i]));
        }
    }
    NormalizedAdjacency {
        matrix: Csr::from_sorted_entries(n, n, &entries),
    }
}

/// Sparse-dense product against the normalized adjacency.
pub fn spmm<T: Scalar>(adj: &NormalizedAdjacency<T>, dense: &Dense<T>) -> Result<Dense<T>> {
    adj.matrix.matmul_dense(dense)
}

/// A masked training graph plus the index maps back to the source graph.
#[derive(Debug, Clone)]
pub struct InducedGraph<T> {
    pub graph: Graph<T>,
    /// Original node id of each retained node.
    pub old_of_new: Vec<usize>,
    /// New id of each original node, `None` if masked out.
    pub new_of_old: Vec<Option<usize>>,
}

/// Remove validation and test nodes, keeping every other node (isolated
/// survivors included) and only the edges between retained nodes. The
/// training index set is remapped; val/test become empty.
pub fn induce_training_graph<T: Scalar>(graph: &Graph<T>) -> Result<InducedGraph<T>> {
    let masked: BTreeSet<usize> = graph
        .split
        .val
        .iter()
        .chain(graph.split.test.iter())
        .copied()
        .collect();
    let old_of_new: Vec<usize> = (0..graph.num_nodes)
        .filter(|i| !masked.contains(i))
        .collect();
    if old_of_new.is_empty() {
        return Err(Error::Validation(
            "masking removed every node from the training graph".into(),
        ));
    }
    let mut new_of_old = vec![None; graph.num_nodes];
    for (new, &old) in old_of_new.iter().enumerate() {
        new_of_old[old] = Some(new);
    }

    let mut edges = Vec::new();
    for (i, j, _) in graph.adjacency.iter_entries() {
        if i < j {
            if let (Some(a), Some(b)) = (new_of_old[i], new_of_old[j]) {
                edges.push((a, b));
            }
        }
    }
    let features = graph.features.select_rows(&old_of_new);
    let labels: Vec<usize> = old_of_new.iter().map(|&i| graph.labels[i]).collect();
    let train: Vec<usize> = graph
        .split
        .train
        .iter()
        .filter_map(|&i| new_of_old[i])
        .collect();
    if train.len() != graph.split.train.len() {
        return Err(Error::Validation(
            "training indices overlap the masked val/test sets".into(),
        ));
    }
    let split = DataSplit {
        train,
        val: Vec::new(),
        test: Vec::new(),
    };
    let induced = Graph::from_edges(
        old_of_new.len(),
        graph.num_classes,
        &edges,
        features,
        labels,
        split,
    )?;
    Ok(InducedGraph {
        graph: induced,
        old_of_new,
        new_of_old,
    })
}

/// Scale each row to sum to one; all-zero rows are left unchanged.
/// Input must be nonnegative.
pub fn row_normalize_features<T: Scalar>(features: &Dense<T>) -> Dense<T> {
    let mut out = features.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let sum: T = row.iter().copied().sum();
        if sum > T::zero() {
            let inv = T::one() / sum;
            row.iter_mut().for_each(|x| *x = *x * inv);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_graph(
        n: usize,
        edges: &[(usize, usize)],
        labels: Vec<usize>,
        split: DataSplit,
    ) -> Graph<f64> {
        let classes = labels.iter().max().map_or(1, |&m| m + 1);
        Graph::from_edges(n, classes, edges, Dense::zeros(n, 2), labels, split).unwrap()
    }

    /// Dense reference for the normalization formula.
    fn dense_normalized(graph: &Graph<f64>) -> Dense<f64> {
        let n = graph.num_nodes;
        let mut a = graph.adjacency.to_dense();
        for i in 0..n {
            a.set(i, i, 1.0);
        }
        let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
        let mut out = Dense::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, a.get(i, j) / (deg[i] * deg[j]).sqrt());
            }
        }
        out
    }

    #[test]
    fn single_node_normalizes_to_identity() {
        let g = tiny_graph(1, &[], vec![0], DataSplit::default());
        let adj = normalize_adjacency(&g);
        assert_eq!(adj.matrix.to_dense().row(0), &[1.0]);
    }

    #[test]
    fn two_node_edge_normalizes_to_halves() {
        let g = tiny_graph(2, &[(0, 1)], vec![0, 0], DataSplit::default());
        let adj = normalize_adjacency(&g).matrix.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((adj.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalization_matches_dense_formula_on_random_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.15 {
                    edges.push((i, j));
                }
            }
        }
        let g = tiny_graph(n, &edges, vec![0; n], DataSplit::default());
        let adj = normalize_adjacency(&g).matrix.to_dense();
        let reference = dense_normalized(&g);
        assert!(adj.max_abs_diff(&reference) < 1e-12);
    }

    #[test]
    fn normalized_adjacency_is_bitwise_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 15;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.3 {
                    edges.push((i, j));
                }
            }
        }
        let g = tiny_graph(n, &edges, vec![0; n], DataSplit::default());
        let adj = normalize_adjacency(&g).matrix;
        for (i, j, v) in adj.iter_entries() {
            assert!(adj.get(j, i).to_bits() == v.to_bits());
        }
    }

    #[test]
    fn spmm_single_node_identity() {
        let g = tiny_graph(1, &[], vec![0], DataSplit::default());
        let adj = normalize_adjacency(&g);
        let x = Dense::from_rows(&[vec![2.0, -3.0]]);
        let y = spmm(&adj, &x).unwrap();
        assert_eq!(y.row(0), x.row(0));
    }

    #[test]
    fn spmm_two_node_hand_product() {
        let g = tiny_graph(2, &[(0, 1)], vec![0, 0], DataSplit::default());
        let adj = normalize_adjacency(&g);
        let x = Dense::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = spmm(&adj, &x).unwrap();
        assert!((y.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((y.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((y.get(1, 0) - 0.5).abs() < 1e-15);
        assert!((y.get(1, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spmm_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.25 {
                    edges.push((i, j));
                }
            }
        }
        let g = tiny_graph(n, &edges, vec![0; n], DataSplit::default());
        let adj = normalize_adjacency(&g);
        for _ in 0..5 {
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mut x = Dense::<f64>::zeros(n, 3);
            let mut y = Dense::<f64>::zeros(n, 3);
            for i in 0..n {
                for j in 0..3 {
                    x.set(i, j, rng.gen_range(-1.0..1.0));
                    y.set(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            let mut combo = x.clone();
            combo.scale(a);
            combo.add_scaled(&y, b);
            let lhs = spmm(&adj, &combo).unwrap();
            let mut rhs = spmm(&adj, &x).unwrap();
            rhs.scale(a);
            rhs.add_scaled(&spmm(&adj, &y).unwrap(), b);
            assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }

    #[test]
    fn induce_with_empty_masks_is_identity() {
        let g = tiny_graph(3, &[(0, 1), (1, 2)], vec![0, 1, 0], DataSplit::default());
        let ind = induce_training_graph(&g).unwrap();
        assert_eq!(ind.old_of_new, vec![0, 1, 2]);
        assert_eq!(ind.graph.num_edges(), 2);
    }

    #[test]
    fn induce_path_drops_edges_through_masked_node() {
        let split = DataSplit {
            train: vec![0],
            val: vec![],
            test: vec![1],
        };
        let g = tiny_graph(3, &[(0, 1), (1, 2)], vec![0, 1, 0], split);
        let ind = induce_training_graph(&g).unwrap();
        assert_eq!(ind.graph.num_nodes, 2);
        assert_eq!(ind.graph.num_edges(), 0);
        assert_eq!(ind.graph.split.train, vec![0]);
        assert_eq!(ind.old_of_new, vec![0, 2]);
    }

    #[test]
    fn induce_preserves_adjacency_restricted_to_retained_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 14;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.3 {
                    edges.push((i, j));
                }
            }
        }
        let split = DataSplit {
            train: vec![0, 2],
            val: vec![3, 7],
            test: vec![5, 11, 12],
        };
        let g = tiny_graph(n, &edges, vec![0; n], split);
        let ind = induce_training_graph(&g).unwrap();
        for (a, &old_a) in ind.old_of_new.iter().enumerate() {
            for (b, &old_b) in ind.old_of_new.iter().enumerate() {
                assert_eq!(
                    ind.graph.adjacency.get(a, b),
                    g.adjacency.get(old_a, old_b),
                    "adjacency restriction mismatch at ({a},{b})"
                );
            }
        }
    }

    #[test]
    fn induce_everything_masked_is_error() {
        let split = DataSplit {
            train: vec![],
            val: vec![0],
            test: vec![1],
        };
        let g = tiny_graph(2, &[(0, 1)], vec![0, 1], split);
        assert!(induce_training_graph(&g).is_err());
    }

    #[test]
    fn row_normalize_hand_cases() {
        let x = Dense::from_rows(&[vec![2.0, 2.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let y = row_normalize_features(&x);
        assert_eq!(y.row(0), &[0.5, 0.5, 0.0]);
        assert_eq!(y.row(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn row_normalize_sums_are_zero_or_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = Dense::<f64>::zeros(25, 6);
        for i in 0..25 {
            for j in 0..6 {
                if rng.gen::<f64>() < 0.4 {
                    x.set(i, j, rng.gen_range(0.0..3.0));
                }
            }
        }
        let y = row_normalize_features(&x);
        for i in 0..y.rows() {
            let s: f64 = y.row(i).iter().sum();
            assert!(s.abs() < 1e-12 || (s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_out_of_range_rejected() {
        let r = Graph::<f64>::from_edges(
            2,
            2,
            &[(0, 1)],
            Dense::zeros(2, 1),
            vec![0, 2],
            DataSplit::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn directed_input_is_symmetrized_and_deduplicated() {
        let g = tiny_graph(
            4,
            &[(0, 1), (1, 0), (1, 2), (1, 2)],
            vec![0, 0, 0, 0],
            DataSplit::default(),
        );
        assert_eq!(g.adjacency.nnz(), 4); // (0,1),(1,0),(1,2),(2,1)
    }
}
