//! Two-layer GCN: `logits = Â · relu(Â X W0) · W1` with dropout on the
//! inputs of each layer during training.

use rand::Rng;

use crate::dense::Dense;
use crate::graph::{spmm, NormalizedAdjacency};
use crate::nn::{dropout_mask, dropout_nonzero, glorot_uniform, relu, relu_mask, ParamTensor};
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct GcnModel<T> {
    /// First-layer transform, `D×h`.
    pub w0: ParamTensor<T>,
    /// Last-layer transform, `h×C`.
    pub w1: ParamTensor<T>,
    pub dropout: f64,
    version: u64,
}

impl<T: Scalar> GcnModel<T> {
    pub fn new<R: Rng>(
        num_features: usize,
        hidden: usize,
        num_classes: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        assert!(hidden > 0, "hidden width must be positive");
        GcnModel {
            w0: ParamTensor::new(glorot_uniform(num_features, hidden, rng)),
            w1: ParamTensor::new(glorot_uniform(hidden, num_classes, rng)),
            dropout,
            version: 0,
        }
    }

    /// Monotone counter bumped on every parameter update; traces carry
    /// the value they were captured at.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor<T>; 2] {
        [&mut self.w0, &mut self.w1]
    }

    pub fn named_params(&self) -> Vec<(String, &Dense<T>)> {
        vec![("w0".into(), &self.w0.value), ("w1".into(), &self.w1.value)]
    }
}

/// Cached intermediates of one forward pass. Traces from train mode
/// carry the layer inputs the backward pass needs; eval-mode traces
/// only carry the hidden embedding and logits.
#[derive(Debug, Clone)]
pub struct GcnTrace<T> {
    version: u64,
    /// Input features actually used (dropout applied); train mode only.
    x_used: Option<Dense<T>>,
    /// First-layer pre-activation `Â X W0`.
    pub pre0: Dense<T>,
    /// Hidden embedding `H = relu(Â X W0)`; the decorrelation input.
    pub hidden: Dense<T>,
    h_mask: Option<Dense<T>>,
    /// Hidden embedding after dropout, as fed to the last layer; train
    /// mode only.
    h_used: Option<Dense<T>>,
    pub logits: Dense<T>,
}

/// Forward pass. Dropout is applied to the inputs of both layers only
/// when `train_mode` is set and the model's rate is positive.
pub fn gcn_forward<T: Scalar, R: Rng>(
    adj: &NormalizedAdjacency<T>,
    features: &Dense<T>,
    model: &GcnModel<T>,
    train_mode: bool,
    rng: &mut R,
) -> Result<GcnTrace<T>> {
    if features.cols() != model.w0.value.rows() {
        return Err(Error::Shape(format!(
            "features have {} columns, w0 expects {}",
            features.cols(),
            model.w0.value.rows()
        )));
    }
    let use_dropout = train_mode && model.dropout > 0.0;
    let x_used = if use_dropout {
        Some(dropout_nonzero(features, model.dropout, rng))
    } else if train_mode {
        Some(features.clone())
    } else {
        None
    };
    let x_ref = x_used.as_ref().unwrap_or(features);
    let pre0 = spmm(adj, &x_ref.matmul(&model.w0.value)?)?;
    let hidden = relu(&pre0);
    let (h_used, h_mask) = if use_dropout {
        let mask = dropout_mask(hidden.rows(), hidden.cols(), model.dropout, rng);
        (Some(hidden.hadamard(&mask)), Some(mask))
    } else if train_mode {
        (Some(hidden.clone()), None)
    } else {
        (None, None)
    };
    let h_ref = h_used.as_ref().unwrap_or(&hidden);
    let logits = spmm(adj, &h_ref.matmul(&model.w1.value)?)?;
    Ok(GcnTrace {
        version: model.version,
        x_used,
        pre0,
        hidden,
        h_mask,
        h_used,
        logits,
    })
}

/// Reverse pass: writes parameter gradients for the given upstream
/// `dlogits`. Fails if the model was updated since the trace was taken.
pub fn gcn_backward<T: Scalar>(
    adj: &NormalizedAdjacency<T>,
    model: &mut GcnModel<T>,
    trace: &GcnTrace<T>,
    dlogits: &Dense<T>,
) -> Result<()> {
    if trace.version != model.version {
        return Err(Error::StaleTrace);
    }
    let (Some(x_used), Some(h_used)) = (&trace.x_used, &trace.h_used) else {
        return Err(Error::Validation(
            "backward requires a train-mode forward trace".into(),
        ));
    };
    // Â is symmetric, so Âᵀ· = Â·.
    let d_hw = spmm(adj, dlogits)?;
    model.w1.grad = h_used.transpose_matmul(&d_hw)?;
    let d_h_used = d_hw.matmul_nt(&model.w1.value)?;
    let d_hidden = match &trace.h_mask {
        Some(mask) => d_h_used.hadamard(mask),
        None => d_h_used,
    };
    let d_pre0 = d_hidden.hadamard(&relu_mask(&trace.pre0));
    let d_xw = spmm(adj, &d_pre0)?;
    model.w0.grad = x_used.transpose_matmul(&d_xw)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, DataSplit, Graph};
    use crate::nn::gradcheck;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_node_adj() -> NormalizedAdjacency<f64> {
        let g = Graph::from_edges(
            1,
            1,
            &[],
            Dense::zeros(1, 1),
            vec![0],
            DataSplit::default(),
        )
        .unwrap();
        normalize_adjacency(&g)
    }

    #[test]
    fn hand_example_single_node() {
        let adj = one_node_adj();
        let x = Dense::from_rows(&[vec![1.0, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GcnModel::<f64>::new(2, 1, 1, 0.0, &mut rng);
        model.w0.value = Dense::from_rows(&[vec![1.0], vec![-1.0]]);
        model.w1.value = Dense::from_rows(&[vec![2.0]]);
        let trace = gcn_forward(&adj, &x, &model, false, &mut rng).unwrap();
        assert_eq!(trace.hidden.get(0, 0), 1.0);
        assert_eq!(trace.logits.get(0, 0), 2.0);
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let adj = one_node_adj();
        let x = Dense::from_rows(&[vec![0.3, -0.4]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GcnModel::<f64>::new(2, 3, 2, 0.0, &mut rng);
        model.w0.value.fill(0.0);
        model.w1.value.fill(0.0);
        let trace = gcn_forward(&adj, &x, &model, true, &mut rng).unwrap();
        assert!(trace.logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let (graph, x) = gradcheck::small_graph(8, 3, 2, 17);
        let adj = normalize_adjacency(&graph);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = GcnModel::<f64>::new(3, 4, 2, 0.0, &mut rng);
        let t_train = gcn_forward(&adj, &x, &model, true, &mut rng).unwrap();
        let t_eval = gcn_forward(&adj, &x, &model, false, &mut rng).unwrap();
        assert!(t_train.logits.max_abs_diff(&t_eval.logits) == 0.0);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let (graph, x) = gradcheck::small_graph(6, 3, 2, 3);
        let adj = normalize_adjacency(&graph);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = GcnModel::<f64>::new(3, 4, 2, 0.0, &mut rng);
        let trace = gcn_forward(&adj, &x, &model, true, &mut rng).unwrap();
        let dlogits = Dense::zeros(6, 2);
        gcn_backward(&adj, &mut model, &trace, &dlogits).unwrap();
        assert!(model.w0.grad.data().iter().all(|&v| v == 0.0));
        assert!(model.w1.grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_trace_is_rejected() {
        let (graph, x) = gradcheck::small_graph(5, 3, 2, 4);
        let adj = normalize_adjacency(&graph);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = GcnModel::<f64>::new(3, 4, 2, 0.0, &mut rng);
        let trace = gcn_forward(&adj, &x, &model, false, &mut rng).unwrap();
        model.bump_version();
        let dlogits = Dense::zeros(5, 2);
        assert!(matches!(
            gcn_backward(&adj, &mut model, &trace, &dlogits),
            Err(Error::StaleTrace)
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let err = gradcheck::gcn_max_rel_err(9, 3, 4, 2, 123);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn logits_are_permutation_equivariant() {
        let (graph, x) = gradcheck::small_graph(7, 3, 2, 21);
        let adj = normalize_adjacency(&graph);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = GcnModel::<f64>::new(3, 4, 2, 0.0, &mut rng);
        let base = gcn_forward(&adj, &x, &model, false, &mut rng)
            .unwrap()
            .logits;

        // permute nodes: reverse order
        let n = graph.num_nodes;
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut edges = Vec::new();
        for (i, j, _) in graph.adjacency.iter_entries() {
            if i < j {
                edges.push((perm[i], perm[j]));
            }
        }
        let px = x.select_rows(&{
            // inverse permutation applied to rows: row perm[i] of px is row i of x
            let mut inv = vec![0usize; n];
            for (a, &b) in perm.iter().enumerate() {
                inv[b] = a;
            }
            inv
        });
        let pgraph = Graph::from_edges(
            n,
            graph.num_classes,
            &edges,
            px.clone(),
            (0..n).map(|i| graph.labels[perm.iter().position(|&p| p == i).unwrap()]).collect(),
            DataSplit::default(),
        )
        .unwrap();
        let padj = normalize_adjacency(&pgraph);
        let permuted = gcn_forward(&padj, &px, &model, false, &mut rng)
            .unwrap()
            .logits;
        for i in 0..n {
            for c in 0..2 {
                assert!(
                    (base.get(i, c) - permuted.get(perm[i], c)).abs() < 1e-10,
                    "equivariance violated at node {i} class {c}"
                );
            }
        }
    }

    #[test]
    fn forward_works_at_f32() {
        let g = Graph::<f32>::from_edges(
            2,
            1,
            &[(0, 1)],
            Dense::from_rows(&[vec![1.0f32, 0.0], vec![0.0, 1.0]]),
            vec![0, 0],
            DataSplit::default(),
        )
        .unwrap();
        let adj = normalize_adjacency(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = GcnModel::<f32>::new(2, 3, 2, 0.0, &mut rng);
        let trace = gcn_forward(&adj, &g.features, &model, false, &mut rng).unwrap();
        assert_eq!(trace.logits.shape(), (2, 2));
    }
}
