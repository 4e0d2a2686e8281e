//! Central finite-difference oracles for the model gradients.
//!
//! These only use forward passes and the loss, so they stay independent
//! of the hand-derived backward implementations they check. Test
//! support; not part of the training path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::Dense;
use crate::graph::{normalize_adjacency, DataSplit, Graph};
use crate::nn::gat::{gat_backward, gat_forward, GatModel, Neighborhoods};
use crate::nn::gcn::{gcn_backward, gcn_forward, GcnModel};
use crate::nn::loss::weighted_softmax_ce;
use crate::nn::ParamTensor;

const FD_STEP: f64 = 1e-5;

/// Random small graph with random features, for gradient checks.
pub fn small_graph(n: usize, d: usize, classes: usize, seed: u64) -> (Graph<f64>, Dense<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < 0.4 {
                edges.push((i, j));
            }
        }
    }
    let mut feats = Dense::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            feats.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    let g = Graph::from_edges(n, classes, &edges, feats.clone(), labels, DataSplit::default())
        .unwrap();
    (g, feats)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

fn labeled_setup(n: usize, seed: u64) -> (Vec<usize>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let rows: Vec<usize> = (0..n).filter(|_| rng.gen::<f64>() < 0.7).collect();
    let rows = if rows.is_empty() { vec![0] } else { rows };
    let weights: Vec<f64> = rows.iter().map(|_| rng.gen_range(0.1..2.0)).collect();
    (rows, weights)
}

/// Perturb every parameter entry by ±`FD_STEP`, re-evaluate the loss,
/// and report the max relative error against the analytic gradients.
fn fd_check<M>(
    model: &mut M,
    params_of: impl Fn(&mut M) -> Vec<&mut ParamTensor<f64>>,
    loss_of: impl Fn(&M) -> f64,
    analytic: &[Dense<f64>],
) -> f64 {
    let mut max_err = 0.0_f64;
    for k in 0..analytic.len() {
        for idx in 0..analytic[k].data().len() {
            let orig = params_of(model)[k].value.data()[idx];
            params_of(model)[k].value.data_mut()[idx] = orig + FD_STEP;
            let lp = loss_of(model);
            params_of(model)[k].value.data_mut()[idx] = orig - FD_STEP;
            let lm = loss_of(model);
            params_of(model)[k].value.data_mut()[idx] = orig;
            let fd = (lp - lm) / (2.0 * FD_STEP);
            max_err = max_err.max(rel_err(analytic[k].data()[idx], fd));
        }
    }
    max_err
}

/// Max relative error between analytic and finite-difference gradients
/// of a random small GCN instance.
pub fn gcn_max_rel_err(n: usize, d: usize, hidden: usize, classes: usize, seed: u64) -> f64 {
    let (graph, feats) = small_graph(n, d, classes, seed);
    let adj = normalize_adjacency(&graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GcnModel::<f64>::new(d, hidden, classes, 0.0, &mut rng);
    let (rows, weights) = labeled_setup(n, seed);
    let labels = graph.labels.clone();

    let trace = gcn_forward(&adj, &feats, &model, true, &mut rng).unwrap();
    let (_, dlogits) = weighted_softmax_ce(&trace.logits, &rows, &labels, &weights).unwrap();
    gcn_backward(&adj, &mut model, &trace, &dlogits).unwrap();
    let analytic = vec![model.w0.grad.clone(), model.w1.grad.clone()];

    fd_check(
        &mut model,
        |m| m.params_mut().into_iter().collect(),
        |m| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let tr = gcn_forward(&adj, &feats, m, true, &mut r).unwrap();
            weighted_softmax_ce(&tr.logits, &rows, &labels, &weights)
                .unwrap()
                .0
        },
        &analytic,
    )
}

/// Max relative error for a random small GAT instance, covering the
/// transform matrices and the attention vectors of every head.
pub fn gat_max_rel_err(
    n: usize,
    d: usize,
    heads1: usize,
    head_dim: usize,
    classes: usize,
    heads2: usize,
    seed: u64,
) -> f64 {
    let (graph, feats) = small_graph(n, d, classes, seed);
    let neigh = Neighborhoods::from_graph(&graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GatModel::<f64>::new(d, heads1, head_dim, classes, heads2, 0.0, &mut rng);
    let (rows, weights) = labeled_setup(n, seed);
    let labels = graph.labels.clone();

    let trace = gat_forward(&neigh, &feats, &model, true, &mut rng).unwrap();
    let (_, dlogits) = weighted_softmax_ce(&trace.logits, &rows, &labels, &weights).unwrap();
    gat_backward(&neigh, &mut model, &trace, &dlogits).unwrap();
    let analytic: Vec<Dense<f64>> = model
        .params_mut()
        .iter()
        .map(|p| p.grad.clone())
        .collect();

    fd_check(
        &mut model,
        |m| m.params_mut(),
        |m| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let tr = gat_forward(&neigh, &feats, m, true, &mut r).unwrap();
            weighted_softmax_ce(&tr.logits, &rows, &labels, &weights)
                .unwrap()
                .0
        },
        &analytic,
    )
}
