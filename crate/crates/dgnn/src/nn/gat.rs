//! Two-layer graph attention network.
//!
//! Layer 1 concatenates the heads, layer 2 averages them. Each head uses
//! separate matrices for transforming embeddings and for computing
//! attention logits; attention coefficients are a per-neighborhood
//! softmax over `leaky_relu(a_src·(Wa x_i) + a_dst·(Wa x_j))` with the
//! neighborhood including the node itself.

use rand::Rng;

use crate::dense::Dense;
use crate::graph::Graph;
use crate::nn::{
    dropout_mask, dropout_nonzero, elu, elu_grad, glorot_uniform, leaky_relu, leaky_relu_grad,
    ParamTensor,
};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Neighbors-plus-self lists in CSR form; attention runs over these.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl Neighborhoods {
    pub fn from_graph<T: Scalar>(graph: &Graph<T>) -> Self {
        let n = graph.num_nodes;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let neigh = graph.neighbors(i);
            let mut placed_self = false;
            for &j in neigh {
                if !placed_self && j > i {
                    cols.push(i);
                    placed_self = true;
                }
                cols.push(j);
            }
            if !placed_self {
                cols.push(i);
            }
            row_ptr.push(cols.len());
        }
        Neighborhoods { row_ptr, cols }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.row_ptr.len() - 1
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    #[inline]
    fn span(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }
}

/// One attention head: embedding transform, attention transform, and the
/// source/target attention vectors.
#[derive(Debug, Clone)]
pub struct GatHead<T> {
    pub w_t: ParamTensor<T>,
    pub w_a: ParamTensor<T>,
    /// Column vector, `out_dim × 1`.
    pub a_src: ParamTensor<T>,
    pub a_dst: ParamTensor<T>,
}

impl<T: Scalar> GatHead<T> {
    fn new<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        GatHead {
            w_t: ParamTensor::new(glorot_uniform(in_dim, out_dim, rng)),
            w_a: ParamTensor::new(glorot_uniform(in_dim, out_dim, rng)),
            a_src: ParamTensor::new(glorot_uniform(out_dim, 1, rng)),
            a_dst: ParamTensor::new(glorot_uniform(out_dim, 1, rng)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GatModel<T> {
    pub layer1: Vec<GatHead<T>>,
    pub layer2: Vec<GatHead<T>>,
    pub dropout: f64,
    /// Negative slope of the attention leaky ReLU.
    pub slope: f64,
    version: u64,
}

impl<T: Scalar> GatModel<T> {
    /// `heads1` first-layer heads of `head_dim` features each
    /// (concatenated), `heads2` output heads of `num_classes` features
    /// (averaged).
    pub fn new<R: Rng>(
        num_features: usize,
        heads1: usize,
        head_dim: usize,
        num_classes: usize,
        heads2: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        assert!(heads1 > 0 && heads2 > 0 && head_dim > 0);
        let hidden = heads1 * head_dim;
        GatModel {
            layer1: (0..heads1)
                .map(|_| GatHead::new(num_features, head_dim, rng))
                .collect(),
            layer2: (0..heads2)
                .map(|_| GatHead::new(hidden, num_classes, rng))
                .collect(),
            dropout,
            slope: 0.2,
            version: 0,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.layer1.len() * self.layer1[0].w_t.value.cols()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        self.layer1
            .iter_mut()
            .chain(self.layer2.iter_mut())
            .flat_map(|h| {
                [
                    &mut h.w_t,
                    &mut h.w_a,
                    &mut h.a_src,
                    &mut h.a_dst,
                ]
            })
            .collect()
    }

    pub fn named_params(&self) -> Vec<(String, &Dense<T>)> {
        let mut out = Vec::new();
        for (l, heads) in [(1usize, &self.layer1), (2, &self.layer2)] {
            for (k, h) in heads.iter().enumerate() {
                out.push((format!("l{l}.h{k}.w_t"), &h.w_t.value));
                out.push((format!("l{l}.h{k}.w_a"), &h.w_a.value));
                out.push((format!("l{l}.h{k}.a_src"), &h.a_src.value));
                out.push((format!("l{l}.h{k}.a_dst"), &h.a_dst.value));
            }
        }
        out
    }
}

/// Per-head cached intermediates.
#[derive(Debug, Clone)]
pub struct HeadTrace<T> {
    /// `Xin · Wt`.
    pub t: Dense<T>,
    /// `Xin · Wa`.
    pub u: Dense<T>,
    /// `U · a_src`, one scalar per node.
    pub s: Dense<T>,
    /// `U · a_dst`, one scalar per node.
    pub d: Dense<T>,
    /// Attention coefficients in `Neighborhoods` CSR order.
    pub alpha: Vec<T>,
    /// Aggregated head output (pre-activation), `N × out_dim`.
    pub out: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct GatTrace<T> {
    version: u64,
    /// Train mode only.
    x_used: Option<Dense<T>>,
    pub l1: Vec<HeadTrace<T>>,
    /// Hidden embedding: heads' ELU outputs concatenated. The
    /// decorrelation input.
    pub hidden: Dense<T>,
    h_mask: Option<Dense<T>>,
    /// Train mode only.
    h_used: Option<Dense<T>>,
    pub l2: Vec<HeadTrace<T>>,
    pub logits: Dense<T>,
}

fn head_forward<T: Scalar>(
    neigh: &Neighborhoods,
    xin: &Dense<T>,
    head: &GatHead<T>,
    slope: T,
) -> Result<HeadTrace<T>> {
    let t = xin.matmul(&head.w_t.value)?;
    let u = xin.matmul(&head.w_a.value)?;
    let s = u.matmul(&head.a_src.value)?;
    let d = u.matmul(&head.a_dst.value)?;
    let n = neigh.num_nodes();
    let mut alpha = vec![T::zero(); neigh.cols.len()];
    let mut out = Dense::zeros(n, t.cols());
    for i in 0..n {
        let span = neigh.span(i);
        let js = neigh.row(i);
        let mut max_e = T::neg_infinity();
        for (slot, &j) in span.clone().zip(js) {
            let e = leaky_relu(s.get(i, 0) + d.get(j, 0), slope);
            alpha[slot] = e;
            max_e = max_e.max(e);
        }
        let mut denom = T::zero();
        for slot in span.clone() {
            let v = (alpha[slot] - max_e).exp();
            alpha[slot] = v;
            denom = denom + v;
        }
        let out_row = out.row_mut(i);
        for (slot, &j) in span.zip(js) {
            let a = alpha[slot] / denom;
            alpha[slot] = a;
            for (o, &tv) in out_row.iter_mut().zip(t.row(j)) {
                *o = *o + a * tv;
            }
        }
    }
    Ok(HeadTrace {
        t,
        u,
        s,
        d,
        alpha,
        out,
    })
}

/// Backward through one head. Accumulates parameter gradients in `head`
/// and returns the gradient w.r.t. the head's input.
fn head_backward<T: Scalar>(
    neigh: &Neighborhoods,
    xin: &Dense<T>,
    head: &mut GatHead<T>,
    trace: &HeadTrace<T>,
    dout: &Dense<T>,
    slope: T,
) -> Result<Dense<T>> {
    let n = neigh.num_nodes();
    let out_dim = trace.t.cols();
    let mut dt = Dense::zeros(n, out_dim);
    let mut ds = Dense::zeros(n, 1);
    let mut dd = Dense::zeros(n, 1);
    let mut dalpha_row: Vec<T> = Vec::new();
    for i in 0..n {
        let span = neigh.span(i);
        let js = neigh.row(i);
        let dout_row = dout.row(i);
        dalpha_row.clear();
        let mut weighted_sum = T::zero();
        for (slot, &j) in span.clone().zip(js) {
            let mut da = T::zero();
            for (&g, &tv) in dout_row.iter().zip(trace.t.row(j)) {
                da = da + g * tv;
            }
            dalpha_row.push(da);
            weighted_sum = weighted_sum + trace.alpha[slot] * da;
            // dT_j += alpha_ij * dOut_i
            let a = trace.alpha[slot];
            let dt_row = dt.row_mut(j);
            for (o, &g) in dt_row.iter_mut().zip(dout_row) {
                *o = *o + a * g;
            }
        }
        for ((slot, &j), &da) in span.zip(js).zip(&dalpha_row) {
            let de = trace.alpha[slot] * (da - weighted_sum);
            let pre = trace.s.get(i, 0) + trace.d.get(j, 0);
            let dpre = de * leaky_relu_grad(pre, slope);
            ds.set(i, 0, ds.get(i, 0) + dpre);
            dd.set(j, 0, dd.get(j, 0) + dpre);
        }
    }
    // dU = ds ⊗ a_srcᵀ + dd ⊗ a_dstᵀ
    let mut du = Dense::zeros(n, out_dim);
    for i in 0..n {
        let dsi = ds.get(i, 0);
        let ddi = dd.get(i, 0);
        let du_row = du.row_mut(i);
        for k in 0..out_dim {
            du_row[k] = dsi * head.a_src.value.get(k, 0) + ddi * head.a_dst.value.get(k, 0);
        }
    }
    head.a_src.grad.add_scaled(&trace.u.transpose_matmul(&ds)?, T::one());
    head.a_dst.grad.add_scaled(&trace.u.transpose_matmul(&dd)?, T::one());
    head.w_t.grad.add_scaled(&xin.transpose_matmul(&dt)?, T::one());
    head.w_a.grad.add_scaled(&xin.transpose_matmul(&du)?, T::one());
    let mut dxin = dt.matmul_nt(&head.w_t.value)?;
    dxin.add_scaled(&du.matmul_nt(&head.w_a.value)?, T::one());
    Ok(dxin)
}

/// Forward pass over neighbors-plus-self attention. Dropout is applied to
/// the inputs of both layers only in train mode.
pub fn gat_forward<T: Scalar, R: Rng>(
    neigh: &Neighborhoods,
    features: &Dense<T>,
    model: &GatModel<T>,
    train_mode: bool,
    rng: &mut R,
) -> Result<GatTrace<T>> {
    if features.rows() != neigh.num_nodes() {
        return Err(Error::Shape(format!(
            "features have {} rows for {} nodes",
            features.rows(),
            neigh.num_nodes()
        )));
    }
    if features.cols() != model.layer1[0].w_t.value.rows() {
        return Err(Error::Shape(format!(
            "features have {} columns, layer-1 transform expects {}",
            features.cols(),
            model.layer1[0].w_t.value.rows()
        )));
    }
    let slope = T::from_f64_lossy(model.slope);
    let use_dropout = train_mode && model.dropout > 0.0;
    let x_used = if use_dropout {
        Some(dropout_nonzero(features, model.dropout, rng))
    } else if train_mode {
        Some(features.clone())
    } else {
        None
    };
    let x_ref = x_used.as_ref().unwrap_or(features);
    let n = neigh.num_nodes();
    let head_dim = model.layer1[0].w_t.value.cols();
    let mut l1 = Vec::with_capacity(model.layer1.len());
    let mut hidden = Dense::zeros(n, model.hidden_dim());
    for (k, head) in model.layer1.iter().enumerate() {
        let tr = head_forward(neigh, x_ref, head, slope)?;
        let act = elu(&tr.out);
        for i in 0..n {
            hidden.row_mut(i)[k * head_dim..(k + 1) * head_dim].copy_from_slice(act.row(i));
        }
        l1.push(tr);
    }
    let (h_used, h_mask) = if use_dropout {
        let mask = dropout_mask(hidden.rows(), hidden.cols(), model.dropout, rng);
        (Some(hidden.hadamard(&mask)), Some(mask))
    } else if train_mode {
        (Some(hidden.clone()), None)
    } else {
        (None, None)
    };
    let h_ref = h_used.as_ref().unwrap_or(&hidden);
    let mut l2 = Vec::with_capacity(model.layer2.len());
    let classes = model.layer2[0].w_t.value.cols();
    let mut logits = Dense::zeros(n, classes);
    let inv_heads = T::one() / T::from_f64_lossy(model.layer2.len() as f64);
    for head in &model.layer2 {
        let tr = head_forward(neigh, h_ref, head, slope)?;
        logits.add_scaled(&tr.out, inv_heads);
        l2.push(tr);
    }
    Ok(GatTrace {
        version: model.version,
        x_used,
        l1,
        hidden,
        h_mask,
        h_used,
        l2,
        logits,
    })
}

/// Reverse pass: writes gradients for every head's parameters.
pub fn gat_backward<T: Scalar>(
    neigh: &Neighborhoods,
    model: &mut GatModel<T>,
    trace: &GatTrace<T>,
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
    for p in model.params_mut() {
        p.zero_grad();
    }
    let slope = T::from_f64_lossy(model.slope);
    let n = neigh.num_nodes();
    let head_dim = model.layer1[0].w_t.value.cols();

    let mut dout2 = dlogits.clone();
    dout2.scale(T::one() / T::from_f64_lossy(model.layer2.len() as f64));
    let mut d_h_used = Dense::zeros(n, model.hidden_dim());
    for (head, tr) in model.layer2.iter_mut().zip(&trace.l2) {
        let dx = head_backward(neigh, h_used, head, tr, &dout2, slope)?;
        d_h_used.add_scaled(&dx, T::one());
    }
    let d_hidden = match &trace.h_mask {
        Some(mask) => d_h_used.hadamard(mask),
        None => d_h_used,
    };
    for (k, (head, tr)) in model.layer1.iter_mut().zip(&trace.l1).enumerate() {
        let mut dout1 = Dense::zeros(n, head_dim);
        let egrad = elu_grad(&tr.out);
        for i in 0..n {
            let src = &d_hidden.row(i)[k * head_dim..(k + 1) * head_dim];
            let dst = dout1.row_mut(i);
            for (c, (&g, &e)) in src.iter().zip(egrad.row(i)).enumerate() {
                dst[c] = g * e;
            }
        }
        // input gradient not needed past the first layer
        head_backward(neigh, x_used, head, tr, &dout1, slope)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DataSplit, Graph};
    use crate::nn::gradcheck;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path_graph(n: usize) -> Graph<f64> {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let mut feats = Dense::zeros(n, 3);
        for i in 0..n {
            feats.set(i, i % 3, 1.0);
            feats.set(i, (i + 1) % 3, 0.5);
        }
        Graph::from_edges(n, 2, &edges, feats, vec![0; n], DataSplit::default()).unwrap()
    }

    #[test]
    fn equal_attention_logits_give_uniform_coefficients() {
        let g = path_graph(2);
        let neigh = Neighborhoods::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GatModel::<f64>::new(3, 1, 2, 2, 1, 0.0, &mut rng);
        // zero attention transform -> all logits equal -> uniform softmax
        model.layer1[0].w_a.value.fill(0.0);
        let trace = gat_forward(&neigh, &g.features, &model, false, &mut rng).unwrap();
        let tr = &trace.l1[0];
        // node 0 has neighborhood {self, 1} -> coefficients [0.5, 0.5]
        let span = neigh.row(0);
        assert_eq!(span.len(), 2);
        assert!((tr.alpha[0] - 0.5).abs() < 1e-15);
        assert!((tr.alpha[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn attention_coefficients_sum_to_one() {
        let g = path_graph(7);
        let neigh = Neighborhoods::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = GatModel::<f64>::new(3, 2, 3, 2, 2, 0.0, &mut rng);
        let trace = gat_forward(&neigh, &g.features, &model, false, &mut rng).unwrap();
        for tr in trace.l1.iter().chain(&trace.l2) {
            for i in 0..g.num_nodes {
                let sum: f64 = neigh.span(i).map(|slot| tr.alpha[slot]).sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(neigh.span(i).all(|slot| tr.alpha[slot] >= 0.0));
            }
        }
    }

    #[test]
    fn forced_equal_attention_matches_mean_aggregation() {
        // With zeroed attention transforms every layer reduces to a mean
        // over the neighborhood-plus-self of the transformed inputs.
        let g = path_graph(5);
        let neigh = Neighborhoods::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = GatModel::<f64>::new(3, 1, 4, 2, 1, 0.0, &mut rng);
        model.layer1[0].w_a.value.fill(0.0);
        model.layer2[0].w_a.value.fill(0.0);
        let trace = gat_forward(&neigh, &g.features, &model, false, &mut rng).unwrap();

        // oracle: explicit mean aggregation with the same transforms
        let t1 = g.features.matmul(&model.layer1[0].w_t.value).unwrap();
        let mut h = Dense::zeros(5, 4);
        for i in 0..5 {
            let js = neigh.row(i);
            for &j in js {
                for c in 0..4 {
                    h.set(i, c, h.get(i, c) + t1.get(j, c) / js.len() as f64);
                }
            }
        }
        let h = crate::nn::elu(&h);
        let t2 = h.matmul(&model.layer2[0].w_t.value).unwrap();
        let mut logits = Dense::zeros(5, 2);
        for i in 0..5 {
            let js = neigh.row(i);
            for &j in js {
                for c in 0..2 {
                    logits.set(i, c, logits.get(i, c) + t2.get(j, c) / js.len() as f64);
                }
            }
        }
        assert!(trace.logits.max_abs_diff(&logits) < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let err = gradcheck::gat_max_rel_err(8, 3, 2, 3, 2, 1, 77);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn multi_head_output_layer_gradcheck() {
        let err = gradcheck::gat_max_rel_err(6, 3, 2, 2, 2, 2, 13);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn stale_trace_is_rejected() {
        let g = path_graph(4);
        let neigh = Neighborhoods::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = GatModel::<f64>::new(3, 1, 2, 2, 1, 0.0, &mut rng);
        let trace = gat_forward(&neigh, &g.features, &model, false, &mut rng).unwrap();
        model.bump_version();
        let dlogits = Dense::zeros(4, 2);
        assert!(matches!(
            gat_backward(&neigh, &mut model, &trace, &dlogits),
            Err(Error::StaleTrace)
        ));
    }
}
