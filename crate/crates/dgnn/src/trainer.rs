//! Alternating training of GNN parameters and sample weights,
//! evaluation on the full graph, and the multi-seed bias sweep.
//!
//! One outer iteration is one optimizer epoch on the weighted
//! cross-entropy, followed (for the VD/DVD regularizers) by a variable
//! weight computation from the last-layer transform and a sample-weight
//! optimization run against the labeled rows of the hidden embedding.
//! Training runs on the masked training graph; validation and test
//! accuracy are computed on the whole graph. The checkpoint with the
//! best validation accuracy is the one evaluated on test.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{biased_label_select, small_sample_select, BiasConfig};
use crate::decorr::{
    cross_covariance_frobenius, optimize_sample_weights, variable_weights, DecorrConfig,
    DecorrObjective, SampleWeights,
};
use crate::dense::Dense;
use crate::graph::{
    induce_training_graph, normalize_adjacency, row_normalize_features, Graph,
    NormalizedAdjacency,
};
use crate::nn::adam::{adam_step, AdamConfig, AdamState};
use crate::nn::gat::{gat_backward, gat_forward, GatModel, GatTrace, Neighborhoods};
use crate::nn::gcn::{gcn_backward, gcn_forward, GcnModel, GcnTrace};
use crate::nn::loss::weighted_softmax_ce;
use crate::{Error, Result};

type Mat = Dense<f64>;
type Graph64 = Graph<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Gat,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Gcn => write!(f, "gcn"),
            ModelKind::Gat => write!(f, "gat"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    None,
    Vd,
    Dvd,
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regularizer::None => write!(f, "none"),
            Regularizer::Vd => write!(f, "vd"),
            Regularizer::Dvd => write!(f, "dvd"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GatArch {
    pub heads1: usize,
    pub head_dim: usize,
    pub heads2: usize,
}

impl Default for GatArch {
    fn default() -> Self {
        GatArch {
            heads1: 8,
            head_dim: 8,
            heads2: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub regularizer: Regularizer,
    /// GCN hidden width.
    pub hidden: usize,
    pub gat: GatArch,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub decorr: DecorrConfig,
    /// Rescale the variable weights to mean one before the DVD step.
    pub normalize_alpha: bool,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub row_normalize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Gcn,
            regularizer: Regularizer::None,
            hidden: 32,
            gat: GatArch::default(),
            dropout: 0.5,
            adam: AdamConfig {
                lr: 0.01,
                weight_decay: 5e-4,
                ..AdamConfig::default()
            },
            decorr: DecorrConfig::default(),
            normalize_alpha: true,
            max_epochs: 200,
            patience: 100,
            row_normalize: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Named hyperparameter presets for the citation-shaped datasets.
    pub fn preset(name: &str) -> Option<TrainConfig> {
        let gcn = TrainConfig::default();
        let gat = TrainConfig {
            model: ModelKind::Gat,
            dropout: 0.6,
            adam: AdamConfig {
                lr: 0.005,
                weight_decay: 5e-4,
                ..AdamConfig::default()
            },
            max_epochs: 300,
            ..TrainConfig::default()
        };
        match name {
            "cora-gcn" | "citeseer-gcn" | "pubmed-gcn" => Some(gcn),
            "cora-gat" | "citeseer-gat" => Some(gat),
            "pubmed-gat" => Some(TrainConfig {
                gat: GatArch {
                    heads2: 8,
                    ..GatArch::default()
                },
                adam: AdamConfig {
                    lr: 0.005,
                    weight_decay: 1e-3,
                    ..AdamConfig::default()
                },
                ..gat
            }),
            "toy-gcn" => Some(TrainConfig {
                hidden: 16,
                max_epochs: 60,
                patience: 30,
                ..gcn
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
    pub secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochStat>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub val_acc: f64,
    pub test_acc: f64,
    pub sec_per_epoch: f64,
    /// Final sample weights (all ones without a regularizer).
    pub sample_weights: Vec<f64>,
    /// Final variable weights (empty unless the regularizer is DVD).
    pub alpha: Vec<f64>,
}

/// Training result: the report plus the best checkpoint's parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub checkpoint: Vec<(String, Mat)>,
}

/// Either model behind one dispatch surface.
pub enum AnyModel {
    Gcn(GcnModel<f64>),
    Gat(GatModel<f64>),
}

pub enum AnyTrace {
    Gcn(GcnTrace<f64>),
    Gat(GatTrace<f64>),
}

impl AnyTrace {
    pub fn hidden(&self) -> &Mat {
        match self {
            AnyTrace::Gcn(t) => &t.hidden,
            AnyTrace::Gat(t) => &t.hidden,
        }
    }

    pub fn logits(&self) -> &Mat {
        match self {
            AnyTrace::Gcn(t) => &t.logits,
            AnyTrace::Gat(t) => &t.logits,
        }
    }
}

/// Per-graph precomputed aggregation structure.
pub struct GraphCtx {
    adj: Option<NormalizedAdjacency<f64>>,
    neigh: Option<Neighborhoods>,
    features: Mat,
}

impl GraphCtx {
    pub fn new(graph: &Graph64, kind: ModelKind, row_normalize: bool) -> Self {
        let features = if row_normalize {
            row_normalize_features(&graph.features)
        } else {
            graph.features.clone()
        };
        match kind {
            ModelKind::Gcn => GraphCtx {
                adj: Some(normalize_adjacency(graph)),
                neigh: None,
                features,
            },
            ModelKind::Gat => GraphCtx {
                adj: None,
                neigh: Some(Neighborhoods::from_graph(graph)),
                features,
            },
        }
    }
}

impl AnyModel {
    pub fn new(cfg: &TrainConfig, num_features: usize, num_classes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0);
        match cfg.model {
            ModelKind::Gcn => AnyModel::Gcn(GcnModel::new(
                num_features,
                cfg.hidden,
                num_classes,
                cfg.dropout,
                &mut rng,
            )),
            ModelKind::Gat => AnyModel::Gat(GatModel::new(
                num_features,
                cfg.gat.heads1,
                cfg.gat.head_dim,
                num_classes,
                cfg.gat.heads2,
                cfg.dropout,
                &mut rng,
            )),
        }
    }

    pub fn forward(
        &self,
        ctx: &GraphCtx,
        train_mode: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<AnyTrace> {
        match self {
            AnyModel::Gcn(m) => Ok(AnyTrace::Gcn(gcn_forward(
                ctx.adj.as_ref().expect("GCN context"),
                &ctx.features,
                m,
                train_mode,
                rng,
            )?)),
            AnyModel::Gat(m) => Ok(AnyTrace::Gat(gat_forward(
                ctx.neigh.as_ref().expect("GAT context"),
                &ctx.features,
                m,
                train_mode,
                rng,
            )?)),
        }
    }

    pub fn backward(&mut self, ctx: &GraphCtx, trace: &AnyTrace, dlogits: &Mat) -> Result<()> {
        match (self, trace) {
            (AnyModel::Gcn(m), AnyTrace::Gcn(t)) => {
                gcn_backward(ctx.adj.as_ref().expect("GCN context"), m, t, dlogits)
            }
            (AnyModel::Gat(m), AnyTrace::Gat(t)) => {
                gat_backward(ctx.neigh.as_ref().expect("GAT context"), m, t, dlogits)
            }
            _ => Err(Error::Shape("model/trace kind mismatch".into())),
        }
    }

    pub fn optimizer_step(&mut self, state: &mut AdamState<f64>, cfg: &AdamConfig) {
        match self {
            AnyModel::Gcn(m) => {
                let mut params = m.params_mut();
                adam_step(&mut params, state, cfg);
                m.bump_version();
            }
            AnyModel::Gat(m) => {
                let mut params = m.params_mut();
                adam_step(&mut params, state, cfg);
                m.bump_version();
            }
        }
    }

    /// Last-layer transform feeding the variable weights: `w1` for the
    /// GCN, the horizontal concatenation of the output heads' embedding
    /// transforms for the GAT.
    pub fn last_transform(&self) -> Mat {
        match self {
            AnyModel::Gcn(m) => m.w1.value.clone(),
            AnyModel::Gat(m) => {
                let p = m.hidden_dim();
                let per_head = m.layer2[0].w_t.value.cols();
                let mut out = Mat::zeros(p, per_head * m.layer2.len());
                for (k, head) in m.layer2.iter().enumerate() {
                    for r in 0..p {
                        for c in 0..per_head {
                            out.set(r, k * per_head + c, head.w_t.value.get(r, c));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn named_params(&self) -> Vec<(String, Mat)> {
        let borrowed: Vec<(String, &Mat)> = match self {
            AnyModel::Gcn(m) => m.named_params(),
            AnyModel::Gat(m) => m.named_params(),
        };
        borrowed
            .into_iter()
            .map(|(name, mat)| (name, mat.clone()))
            .collect()
    }

    /// Load parameter values by name. Every model parameter must be
    /// present with the right shape.
    pub fn set_named_params(&mut self, entries: &[(String, Mat)]) -> Result<()> {
        let lookup = |name: &str| -> Result<&Mat> {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::Validation(format!("checkpoint missing parameter {name}")))
        };
        let expected: Vec<String> = match self {
            AnyModel::Gcn(m) => m.named_params().into_iter().map(|(n, _)| n).collect(),
            AnyModel::Gat(m) => m.named_params().into_iter().map(|(n, _)| n).collect(),
        };
        for name in &expected {
            let value = lookup(name)?.clone();
            let target: &mut crate::nn::ParamTensor<f64> = match self {
                AnyModel::Gcn(m) => {
                    if name == "w0" {
                        &mut m.w0
                    } else {
                        &mut m.w1
                    }
                }
                AnyModel::Gat(m) => {
                    // names look like l1.h3.w_t
                    let mut it = name.split('.');
                    let layer = it.next().unwrap_or("");
                    let head_tok = it.next().unwrap_or("");
                    let field = it.next().unwrap_or("");
                    let head_idx: usize = head_tok
                        .strip_prefix('h')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| {
                            Error::Validation(format!("bad parameter name {name}"))
                        })?;
                    let heads = match layer {
                        "l1" => &mut m.layer1,
                        "l2" => &mut m.layer2,
                        _ => {
                            return Err(Error::Validation(format!(
                                "bad parameter name {name}"
                            )))
                        }
                    };
                    let head = heads.get_mut(head_idx).ok_or_else(|| {
                        Error::Validation(format!("no head for parameter {name}"))
                    })?;
                    match field {
                        "w_t" => &mut head.w_t,
                        "w_a" => &mut head.w_a,
                        "a_src" => &mut head.a_src,
                        "a_dst" => &mut head.a_dst,
                        _ => {
                            return Err(Error::Validation(format!(
                                "bad parameter name {name}"
                            )))
                        }
                    }
                }
            };
            if target.value.shape() != value.shape() {
                return Err(Error::Validation(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    value.shape(),
                    target.value.shape()
                )));
            }
            target.value = value;
        }
        match self {
            AnyModel::Gcn(m) => m.bump_version(),
            AnyModel::Gat(m) => m.bump_version(),
        }
        Ok(())
    }
}

/// Argmax accuracy over the index set; ties resolve to the lowest class.
pub fn accuracy_from_logits(logits: &Mat, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptyGroup("empty evaluation index set".into()));
    }
    let mut correct = 0usize;
    for &i in idx {
        let row = logits.row(i);
        let mut best = 0usize;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Evaluate a trained model on (an index set of) the full graph.
/// `row_normalize` must match how the model was trained.
pub fn evaluate(
    model: &AnyModel,
    graph: &Graph64,
    idx: &[usize],
    row_normalize: bool,
) -> Result<f64> {
    let kind = match model {
        AnyModel::Gcn(_) => ModelKind::Gcn,
        AnyModel::Gat(_) => ModelKind::Gat,
    };
    let ctx = GraphCtx::new(graph, kind, row_normalize);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = model.forward(&ctx, false, &mut rng)?;
    accuracy_from_logits(trace.logits(), &graph.labels, idx)
}

/// Train on the masked graph per the alternating schedule and report
/// accuracy of the best-validation checkpoint on the full graph.
pub fn train(graph: &Graph64, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let induced = induce_training_graph(graph)?;
    let train_graph = &induced.graph;
    let labeled = train_graph.split.train.clone();
    if labeled.is_empty() {
        return Err(Error::Validation("no labeled training nodes".into()));
    }
    let ctx_train = GraphCtx::new(train_graph, cfg.model, cfg.row_normalize);
    let ctx_full = GraphCtx::new(graph, cfg.model, cfg.row_normalize);

    let mut model = AnyModel::new(cfg, graph.features.cols(), graph.num_classes);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    eval_rng.set_stream(2);

    let mut adam_state = AdamState::new();
    let mut omega = SampleWeights::ones(labeled.len());
    let mut alpha_latest: Vec<f64> = Vec::new();

    let mut history: Vec<EpochStat> = Vec::new();
    let mut best: Option<(f64, usize, Vec<(String, Mat)>, Vec<f64>, Vec<f64>)> = None;

    for epoch in 0..cfg.max_epochs {
        let t0 = Instant::now();

        // θ step: one optimizer epoch of the weighted cross-entropy
        let trace = model.forward(&ctx_train, true, &mut dropout_rng)?;
        let w = omega.w();
        let (loss, dlogits) =
            weighted_softmax_ce(trace.logits(), &labeled, &train_graph.labels, &w)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { iter: epoch });
        }
        model.backward(&ctx_train, &trace, &dlogits)?;
        model.optimizer_step(&mut adam_state, &cfg.adam);

        // ω step against the labeled rows of the fresh hidden embedding
        if cfg.regularizer != Regularizer::None {
            let eval_trace = model.forward(&ctx_train, false, &mut eval_rng)?;
            let h_labeled = eval_trace.hidden().select_rows(&labeled);
            let fit = match cfg.regularizer {
                Regularizer::Vd => optimize_sample_weights(
                    &h_labeled,
                    DecorrObjective::Vd,
                    &cfg.decorr,
                    omega,
                )?,
                Regularizer::Dvd => {
                    let vw = variable_weights(&model.last_transform());
                    let vw = if cfg.normalize_alpha {
                        vw.normalized_mean_one()
                    } else {
                        vw
                    };
                    alpha_latest = vw.alpha.clone();
                    optimize_sample_weights(
                        &h_labeled,
                        DecorrObjective::Dvd { alpha: &vw.alpha },
                        &cfg.decorr,
                        omega,
                    )?
                }
                Regularizer::None => unreachable!(),
            };
            omega = fit.weights;
        }

        // validation on the full graph
        let full_trace = model.forward(&ctx_full, false, &mut eval_rng)?;
        let val_acc = accuracy_from_logits(full_trace.logits(), &graph.labels, &graph.split.val)?;
        let secs = t0.elapsed().as_secs_f64();
        history.push(EpochStat {
            epoch,
            loss,
            val_acc,
            secs,
        });

        let improved = best.as_ref().map_or(true, |(b, ..)| val_acc > *b);
        if improved {
            best = Some((
                val_acc,
                epoch,
                model.named_params(),
                omega.w(),
                alpha_latest.clone(),
            ));
        }
        let best_epoch = best.as_ref().map(|(_, e, ..)| *e).unwrap_or(0);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let (best_val, best_epoch, checkpoint, weights, alpha) =
        best.expect("at least one epoch ran");
    let mut final_model = AnyModel::new(cfg, graph.features.cols(), graph.num_classes);
    final_model.set_named_params(&checkpoint)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let full_trace = final_model.forward(&ctx_full, false, &mut rng)?;
    let test_acc = accuracy_from_logits(full_trace.logits(), &graph.labels, &graph.split.test)?;

    let epochs_run = history.len();
    let sec_per_epoch = history.iter().map(|h| h.secs).sum::<f64>() / epochs_run.max(1) as f64;
    Ok(TrainOutcome {
        report: TrainReport {
            history,
            epochs_run,
            best_epoch,
            val_acc: best_val,
            test_acc,
            sec_per_epoch,
            sample_weights: weights,
            alpha,
        },
        checkpoint,
    })
}

/// Frobenius correlation diagnostic of a trained checkpoint: the
/// labeled-row hidden embedding's cross-covariance with uniform weights
/// and with the learned weights.
pub fn embedding_correlations(
    graph: &Graph64,
    cfg: &TrainConfig,
    checkpoint: &[(String, Mat)],
    sample_weights: &[f64],
) -> Result<(f64, f64)> {
    let induced = induce_training_graph(graph)?;
    let labeled = induced.graph.split.train.clone();
    if labeled.len() != sample_weights.len() {
        return Err(Error::Validation(format!(
            "{} labeled nodes but {} sample weights: checkpoint/split mismatch",
            labeled.len(),
            sample_weights.len()
        )));
    }
    let mut model = AnyModel::new(cfg, graph.features.cols(), graph.num_classes);
    model.set_named_params(checkpoint)?;
    let ctx = GraphCtx::new(&induced.graph, cfg.model, cfg.row_normalize);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = model.forward(&ctx, false, &mut rng)?;
    let h = trace.hidden().select_rows(&labeled);
    let ones = vec![1.0; labeled.len()];
    let unweighted = cross_covariance_frobenius(&h, &ones)?;
    let weighted = cross_covariance_frobenius(&h, sample_weights)?;
    Ok((unweighted, weighted))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BiasCondition {
    Unbiased,
    Biased(f64),
}

impl std::fmt::Display for BiasCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BiasCondition::Unbiased => write!(f, "unbiased"),
            BiasCondition::Biased(eps) => write!(f, "{eps}"),
        }
    }
}

/// One model/regularizer variant to run per condition and seed.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub cfg: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub dataset: String,
    pub bias: String,
    pub model: String,
    pub regularizer: String,
    pub seed: u64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub epochs: usize,
    pub sec_per_epoch: f64,
    pub error: String,
}

/// Regenerate the labeled set for a bias condition on the masked graph
/// and return the full graph with that training split.
pub fn graph_with_condition(
    graph: &Graph64,
    condition: BiasCondition,
    per_class: usize,
    seed: u64,
) -> Result<Graph64> {
    let induced = induce_training_graph(graph)?;
    let selected = match condition {
        BiasCondition::Unbiased => small_sample_select(&induced.graph, per_class, seed),
        BiasCondition::Biased(epsilon) => biased_label_select(
            &induced.graph,
            &BiasConfig {
                epsilon,
                per_class,
                seed,
            },
        )?,
    };
    let original_ids: Vec<usize> = selected.iter().map(|&i| induced.old_of_new[i]).collect();
    graph.with_train_idx(original_ids)
}

/// Run every (condition, variant, seed) cell: regenerate the biased
/// split, train, evaluate. Cell failures are recorded in the row's
/// error column without aborting the sweep.
pub fn bias_sweep(
    graph: &Graph64,
    dataset: &str,
    conditions: &[BiasCondition],
    per_class: usize,
    cells: &[SweepCell],
    seeds: &[u64],
) -> Vec<SweepRow> {
    let mut jobs = Vec::new();
    for (ci, cond) in conditions.iter().enumerate() {
        for (vi, cell) in cells.iter().enumerate() {
            for &seed in seeds {
                jobs.push((ci, vi, *cond, cell.cfg.clone(), seed));
            }
        }
    }
    let mut rows: Vec<(usize, usize, u64, SweepRow)> = jobs
        .into_par_iter()
        .map(|(ci, vi, cond, mut cfg, seed)| {
            cfg.seed = seed;
            let row = match graph_with_condition(graph, cond, per_class, seed)
                .and_then(|g| train(&g, &cfg))
            {
                Ok(outcome) => SweepRow {
                    dataset: dataset.to_string(),
                    bias: cond.to_string(),
                    model: cfg.model.to_string(),
                    regularizer: cfg.regularizer.to_string(),
                    seed,
                    val_acc: outcome.report.val_acc,
                    test_acc: outcome.report.test_acc,
                    epochs: outcome.report.epochs_run,
                    sec_per_epoch: outcome.report.sec_per_epoch,
                    error: String::new(),
                },
                Err(e) => SweepRow {
                    dataset: dataset.to_string(),
                    bias: cond.to_string(),
                    model: cfg.model.to_string(),
                    regularizer: cfg.regularizer.to_string(),
                    seed,
                    val_acc: f64::NAN,
                    test_acc: f64::NAN,
                    epochs: 0,
                    sec_per_epoch: f64::NAN,
                    error: e.to_string(),
                },
            };
            (ci, vi, seed, row)
        })
        .collect();
    rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    rows.into_iter().map(|(_, _, _, r)| r).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub bias: String,
    pub model: String,
    pub regularizer: String,
    pub runs: usize,
    pub failures: usize,
    pub val_mean: f64,
    pub val_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

/// Per-(bias, model, regularizer) mean and standard deviation, in the
/// order the groups first appear.
pub fn aggregate_rows(rows: &[SweepRow]) -> Vec<SweepAggregate> {
    let mut order: Vec<(String, String, String)> = Vec::new();
    for r in rows {
        let key = (r.bias.clone(), r.model.clone(), r.regularizer.clone());
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|(bias, model, reg)| {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.bias == bias && r.model == model && r.regularizer == reg)
                .collect();
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.error.is_empty()).collect();
            let stats = |get: fn(&SweepRow) -> f64| -> (f64, f64) {
                if ok.is_empty() {
                    return (f64::NAN, f64::NAN);
                }
                let n = ok.len() as f64;
                let mean = ok.iter().map(|r| get(r)).sum::<f64>() / n;
                let var = ok.iter().map(|r| (get(r) - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            };
            let (val_mean, val_std) = stats(|r| r.val_acc);
            let (test_mean, test_std) = stats(|r| r.test_acc);
            SweepAggregate {
                bias,
                model,
                regularizer: reg,
                runs: group.len(),
                failures: group.len() - ok.len(),
                val_mean,
                val_std,
                test_mean,
                test_std,
            }
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "dataset,bias,model,regularizer,seed,val_acc,test_acc,epochs,sec_per_epoch,error";

/// Serialize rows as CSV. Floats print in shortest round-trip form, so
/// re-reading the file reproduces the aggregates bitwise.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.dataset,
            r.bias,
            r.model,
            r.regularizer,
            r.seed,
            r.val_acc,
            r.test_acc,
            r.epochs,
            r.sec_per_epoch,
            r.error.replace(',', ";")
        ));
    }
    out
}

pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != SWEEP_CSV_HEADER {
        return Err(Error::Parse {
            file: "sweep.csv".into(),
            line: 1,
            msg: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(10, ',').collect();
        if parts.len() != 10 {
            return Err(Error::Parse {
                file: "sweep.csv".into(),
                line: lineno + 2,
                msg: format!("expected 10 fields, got {}", parts.len()),
            });
        }
        let parse_f = |tok: &str, what: &str| -> Result<f64> {
            tok.parse().map_err(|_| Error::Parse {
                file: "sweep.csv".into(),
                line: lineno + 2,
                msg: format!("bad {what}: {tok:?}"),
            })
        };
        rows.push(SweepRow {
            dataset: parts[0].to_string(),
            bias: parts[1].to_string(),
            model: parts[2].to_string(),
            regularizer: parts[3].to_string(),
            seed: parts[4].parse().map_err(|_| Error::Parse {
                file: "sweep.csv".into(),
                line: lineno + 2,
                msg: format!("bad seed: {:?}", parts[4]),
            })?,
            val_acc: parse_f(parts[5], "val_acc")?,
            test_acc: parse_f(parts[6], "test_acc")?,
            epochs: parts[7].parse().map_err(|_| Error::Parse {
                file: "sweep.csv".into(),
                line: lineno + 2,
                msg: format!("bad epochs: {:?}", parts[7]),
            })?,
            sec_per_epoch: parse_f(parts[8], "sec_per_epoch")?,
            error: parts[9].to_string(),
        });
    }
    Ok(rows)
}
