//! Multi-head graph attention over edge-featured neighborhoods, with a
//! logistic output layer and hand-written reverse-mode gradients.
//!
//! Layer rule per head: `h_i' = σ(Σ_t α_it · W h_t)` where σ is LeakyReLU,
//! the sum runs over the node's neighborhood (self-loop, internal edges,
//! ghost messages), and the attention logits are
//! `ρ_it = a · [W h_i ‖ W h_t ‖ z_it]` passed through LeakyReLU and a softmax
//! over the neighborhood. Hidden layers concatenate head outputs; the final
//! layer averages them.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::view::{neighborhoods, GraphView, NeighborRef};
use crate::gnn::{bce_mean, logit_grad, proximal_term, Predictor};
use crate::linalg::{dot, leaky_relu, leaky_relu_grad, sigmoid, softmax_inplace, Mat};

/// Shape of one attention layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    /// Output width per head.
    pub out_dim: usize,
    pub heads: usize,
    /// Concatenate head outputs (hidden layers) or average them (final layer).
    pub concat: bool,
}

impl LayerSpec {
    pub fn output_width(&self) -> usize {
        if self.concat {
            self.heads * self.out_dim
        } else {
            self.out_dim
        }
    }

    fn attn_len(&self, edge_dim: usize) -> usize {
        2 * self.out_dim + edge_dim
    }

    fn n_params(&self, edge_dim: usize) -> usize {
        self.heads * (self.out_dim * self.in_dim + self.attn_len(edge_dim))
    }
}

/// Full model shape: a stack of attention layers plus a linear logit layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub edge_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub negative_slope: f64,
    /// Replace learned attention with uniform neighborhood averaging.
    #[serde(default)]
    pub uniform_attention: bool,
}

impl ModelSpec {
    /// Stack of `n_layers` attention layers where every hidden layer outputs
    /// `hidden_dim` features (split across `heads`) and the final layer
    /// averages heads down to `hidden_dim / heads`.
    pub fn new(
        input_dim: usize,
        edge_dim: usize,
        n_layers: usize,
        hidden_dim: usize,
        heads: usize,
    ) -> Result<Self> {
        if n_layers == 0 || hidden_dim == 0 || heads == 0 || input_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if hidden_dim % heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {hidden_dim} must be divisible by heads {heads}"
            )));
        }
        let per_head = hidden_dim / heads;
        let mut layers = Vec::with_capacity(n_layers);
        let mut in_dim = input_dim;
        for l in 0..n_layers {
            let concat = l + 1 < n_layers;
            layers.push(LayerSpec { in_dim, out_dim: per_head, heads, concat });
            in_dim = layers[l].output_width();
        }
        Ok(ModelSpec {
            input_dim,
            edge_dim,
            layers,
            negative_slope: 0.2,
            uniform_attention: false,
        })
    }

    /// Output width of the last attention layer (input to the logit layer).
    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.output_width()).unwrap_or(0)
    }

    pub fn n_params(&self) -> usize {
        let body: usize = self.layers.iter().map(|l| l.n_params(self.edge_dim)).sum();
        body + self.output_dim() + 1
    }
}

/// One attention head: projection matrix (out_dim × in_dim, row-major) and
/// attention vector of length 2·out_dim + edge_dim.
#[derive(Clone, Debug)]
pub struct HeadParams {
    pub w: Mat,
    pub a: Vec<f64>,
}

/// Output bias starts at the logit of this prior so initial predictions sit
/// near the anomaly base rate instead of 0.5.
pub const BIAS_PRIOR: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct GatModel {
    pub spec: ModelSpec,
    /// layers[l][k] = parameters of head k in layer l.
    pub layers: Vec<Vec<HeadParams>>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl GatModel {
    /// Uniform Glorot-style init; the output bias starts at logit(BIAS_PRIOR).
    pub fn init(spec: &ModelSpec, rng: &mut ChaCha12Rng) -> Self {
        let mut layers = Vec::with_capacity(spec.layers.len());
        for ls in &spec.layers {
            let mut heads = Vec::with_capacity(ls.heads);
            for _ in 0..ls.heads {
                let bound_w = (6.0 / (ls.in_dim + ls.out_dim) as f64).sqrt();
                let mut w = Mat::zeros(ls.out_dim, ls.in_dim);
                for v in &mut w.data {
                    *v = rng.gen_range(-bound_w..bound_w);
                }
                let alen = ls.attn_len(spec.edge_dim);
                let bound_a = (6.0 / (alen + 1) as f64).sqrt();
                let a = (0..alen).map(|_| rng.gen_range(-bound_a..bound_a)).collect();
                heads.push(HeadParams { w, a });
            }
            layers.push(heads);
        }
        let od = spec.output_dim();
        let bound_o = (6.0 / (od + 1) as f64).sqrt();
        let out_w = (0..od).map(|_| rng.gen_range(-bound_o..bound_o)).collect();
        let out_b = (BIAS_PRIOR / (1.0 - BIAS_PRIOR)).ln();
        GatModel { spec: spec.clone(), layers, out_w, out_b }
    }

    /// All parameters constant; useful for fixtures.
    pub fn constant(spec: &ModelSpec, value: f64) -> Self {
        let mut rng = crate::rng::derive_rng(0, "zero-model", &[]);
        let mut m = GatModel::init(spec, &mut rng);
        let n = m.spec.n_params();
        m = m.with_flat(&vec![value; n]).expect("shape is consistent");
        m
    }

    fn check_view(&self, view: &GraphView) -> Result<()> {
        view.validate(self.spec.edge_dim)?;
        if view.features.cols != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                context: "view feature width".into(),
                expected: self.spec.input_dim,
                actual: view.features.cols,
            });
        }
        for (gi, g) in view.ghosts.iter().enumerate() {
            if g.messages.len() != self.spec.layers.len() {
                return Err(Error::DimensionMismatch {
                    context: format!("ghost {gi} message layers"),
                    expected: self.spec.layers.len(),
                    actual: g.messages.len(),
                });
            }
            for (l, ls) in self.spec.layers.iter().enumerate() {
                if g.messages[l].len() != ls.heads {
                    return Err(Error::DimensionMismatch {
                        context: format!("ghost {gi} layer {l} heads"),
                        expected: ls.heads,
                        actual: g.messages[l].len(),
                    });
                }
                for m in &g.messages[l] {
                    if m.len() != ls.out_dim {
                        return Err(Error::DimensionMismatch {
                            context: format!("ghost {gi} layer {l} message width"),
                            expected: ls.out_dim,
                            actual: m.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Attention weights of one layer given its input representations:
    /// `[head][node][neighbor]`, aligned with `neighborhoods(view)`. Each
    /// per-node row is a probability distribution.
    pub fn attention_coefficients(
        &self,
        layer: usize,
        h_prev: &Mat,
        view: &GraphView,
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        self.check_view(view)?;
        let ls = &self.spec.layers[layer];
        if h_prev.rows != view.n_nodes() || h_prev.cols != ls.in_dim {
            return Err(Error::DimensionMismatch {
                context: format!("layer {layer} input"),
                expected: ls.in_dim,
                actual: h_prev.cols,
            });
        }
        let nbrs = neighborhoods(view);
        let caches = self.layer_forward_cached(layer, h_prev, view, &nbrs);
        Ok(caches.0.into_iter().map(|c| c.alpha).collect())
    }

    /// One attention layer in eval mode.
    pub fn layer_forward(&self, layer: usize, h_prev: &Mat, view: &GraphView) -> Result<Mat> {
        self.check_view(view)?;
        let ls = &self.spec.layers[layer];
        if h_prev.rows != view.n_nodes() || h_prev.cols != ls.in_dim {
            return Err(Error::DimensionMismatch {
                context: format!("layer {layer} input"),
                expected: ls.in_dim,
                actual: h_prev.cols,
            });
        }
        let nbrs = neighborhoods(view);
        Ok(self.layer_forward_cached(layer, h_prev, view, &nbrs).1)
    }

    /// Representations at every depth in eval mode: element 0 is the input
    /// features, element L is the final layer output.
    pub fn forward_representations(&self, view: &GraphView) -> Result<Vec<Mat>> {
        self.check_view(view)?;
        let nbrs = neighborhoods(view);
        let mut reps = vec![view.features.clone()];
        for l in 0..self.spec.layers.len() {
            let h = self.layer_forward_cached(l, reps.last().unwrap(), view, &nbrs).1;
            reps.push(h);
        }
        Ok(reps)
    }

    fn logits_from(&self, h_final: &Mat) -> Vec<f64> {
        (0..h_final.rows)
            .map(|i| dot(h_final.row(i), &self.out_w) + self.out_b)
            .collect()
    }

    /// Forward for one layer, returning per-head caches and the combined
    /// output. `h_in` must already include dropout if training.
    fn layer_forward_cached(
        &self,
        layer: usize,
        h_in: &Mat,
        view: &GraphView,
        nbrs: &[Vec<NeighborRef>],
    ) -> (Vec<HeadCache>, Mat) {
        let ls = &self.spec.layers[layer];
        let n = view.n_nodes();
        let slope = self.spec.negative_slope;
        let zero_edge = vec![0.0; self.spec.edge_dim];
        let mut caches = Vec::with_capacity(ls.heads);
        let mut h_out = Mat::zeros(n, ls.output_width());

        for k in 0..ls.heads {
            let hp = &self.layers[layer][k];
            let u = h_in.mul_transpose(&hp.w);
            let mut rho: Vec<Vec<f64>> = Vec::with_capacity(n);
            let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(n);
            let mut agg = Mat::zeros(n, ls.out_dim);

            for i in 0..n {
                let m = nbrs[i].len();
                let mut scores = Vec::with_capacity(m);
                if self.spec.uniform_attention {
                    alpha.push(vec![1.0 / m as f64; m]);
                    rho.push(Vec::new());
                } else {
                    let a_self = dot(&hp.a[..ls.out_dim], u.row(i));
                    for t in &nbrs[i] {
                        let (uvec, z): (&[f64], &[f64]) = match *t {
                            NeighborRef::SelfLoop => (u.row(i), &zero_edge),
                            NeighborRef::Internal { node, edge } => {
                                (u.row(node), &view.edges[edge].features)
                            }
                            NeighborRef::Ghost { ghost } => (
                                &view.ghosts[ghost].messages[layer][k],
                                &view.ghosts[ghost].edge_features,
                            ),
                        };
                        let r = a_self
                            + dot(&hp.a[ls.out_dim..2 * ls.out_dim], uvec)
                            + dot(&hp.a[2 * ls.out_dim..], z);
                        scores.push(r);
                    }
                    let mut al: Vec<f64> = scores.iter().map(|&r| leaky_relu(r, slope)).collect();
                    softmax_inplace(&mut al);
                    rho.push(scores);
                    alpha.push(al);
                }
                for (pos, t) in nbrs[i].iter().enumerate() {
                    let uvec: &[f64] = match *t {
                        NeighborRef::SelfLoop => u.row(i),
                        NeighborRef::Internal { node, .. } => u.row(node),
                        NeighborRef::Ghost { ghost } => &view.ghosts[ghost].messages[layer][k],
                    };
                    let w = alpha[i][pos];
                    for d in 0..ls.out_dim {
                        *agg.at_mut(i, d) += w * uvec[d];
                    }
                }
            }

            for i in 0..n {
                if ls.concat {
                    for d in 0..ls.out_dim {
                        *h_out.at_mut(i, k * ls.out_dim + d) = leaky_relu(agg.at(i, d), slope);
                    }
                } else {
                    for d in 0..ls.out_dim {
                        *h_out.at_mut(i, d) += leaky_relu(agg.at(i, d), slope) / ls.heads as f64;
                    }
                }
            }
            caches.push(HeadCache { u, rho, alpha, agg });
        }
        (caches, h_out)
    }

    /// Full forward with caches kept for the backward pass. Dropout masks the
    /// input of every layer when a rate and rng are supplied.
    fn forward_cached(
        &self,
        view: &GraphView,
        nbrs: &[Vec<NeighborRef>],
        mut dropout: Option<(&mut ChaCha12Rng, f64)>,
    ) -> ForwardCache {
        let mut layer_caches = Vec::with_capacity(self.spec.layers.len());
        let mut h = view.features.clone();
        for l in 0..self.spec.layers.len() {
            let mask = match dropout {
                Some((ref mut rng, rate)) if rate > 0.0 => {
                    let keep = 1.0 / (1.0 - rate);
                    let mut m = Mat::zeros(h.rows, h.cols);
                    for (v, hv) in m.data.iter_mut().zip(h.data.iter_mut()) {
                        if rng.gen::<f64>() < rate {
                            *v = 0.0;
                            *hv = 0.0;
                        } else {
                            *v = keep;
                            *hv *= keep;
                        }
                    }
                    Some(m)
                }
                _ => None,
            };
            let (heads, h_out) = self.layer_forward_cached(l, &h, view, nbrs);
            layer_caches.push(LayerCache { h_in: h, mask, heads });
            h = h_out;
        }
        let probs = self.logits_from(&h).iter().map(|&z| sigmoid(z)).collect();
        ForwardCache { layers: layer_caches, h_final: h, probs }
    }

    /// Gradient of `bce + λ‖θ−anchor‖²` over the batch, flattened in the same
    /// order as `flatten`. Ghost messages are constants: nothing propagates
    /// into them.
    fn backward(
        &self,
        view: &GraphView,
        nbrs: &[Vec<NeighborRef>],
        cache: &ForwardCache,
        nodes: &[usize],
        labels: &[u8],
        anchor: Option<&[f64]>,
        lambda: f64,
    ) -> Vec<f64> {
        let n = view.n_nodes();
        let slope = self.spec.negative_slope;
        let zero_edge = vec![0.0; self.spec.edge_dim];
        let inv_b = 1.0 / nodes.len() as f64;

        let mut d_logit = vec![0.0; n];
        for (&i, &y) in nodes.iter().zip(labels) {
            d_logit[i] += logit_grad(cache.probs[i], y, inv_b);
        }

        let od = self.spec.output_dim();
        let mut d_out_w = vec![0.0; od];
        let mut d_out_b = 0.0;
        let mut dh = Mat::zeros(n, od);
        for i in 0..n {
            let g = d_logit[i];
            if g == 0.0 {
                continue;
            }
            d_out_b += g;
            for d in 0..od {
                d_out_w[d] += g * cache.h_final.at(i, d);
                *dh.at_mut(i, d) += g * self.out_w[d];
            }
        }

        let mut layer_grads: Vec<Vec<(Mat, Vec<f64>)>> = self
            .spec
            .layers
            .iter()
            .map(|ls| {
                (0..ls.heads)
                    .map(|_| {
                        (
                            Mat::zeros(ls.out_dim, ls.in_dim),
                            vec![0.0; ls.attn_len(self.spec.edge_dim)],
                        )
                    })
                    .collect()
            })
            .collect();

        for l in (0..self.spec.layers.len()).rev() {
            let ls = &self.spec.layers[l];
            let lc = &cache.layers[l];
            let mut dh_prev = Mat::zeros(n, ls.in_dim);
            let mut dalpha_buf: Vec<f64> = Vec::new();

            for k in 0..ls.heads {
                let hp = &self.layers[l][k];
                let hc = &lc.heads[k];
                let (dw, da) = &mut layer_grads[l][k];
                let mut du = Mat::zeros(n, ls.out_dim);

                for i in 0..n {
                    // Per-head slice of the incoming gradient.
                    let mut dagg = vec![0.0; ls.out_dim];
                    let mut any = false;
                    for d in 0..ls.out_dim {
                        let g = if ls.concat {
                            dh.at(i, k * ls.out_dim + d)
                        } else {
                            dh.at(i, d) / ls.heads as f64
                        };
                        if g != 0.0 {
                            any = true;
                        }
                        dagg[d] = g * leaky_relu_grad(hc.agg.at(i, d), slope);
                    }
                    if !any {
                        continue;
                    }

                    let m = nbrs[i].len();
                    dalpha_buf.clear();
                    dalpha_buf.resize(m, 0.0);
                    for (pos, t) in nbrs[i].iter().enumerate() {
                        let uvec: &[f64] = match *t {
                            NeighborRef::SelfLoop => hc.u.row(i),
                            NeighborRef::Internal { node, .. } => hc.u.row(node),
                            NeighborRef::Ghost { ghost } => {
                                &view.ghosts[ghost].messages[l][k]
                            }
                        };
                        dalpha_buf[pos] = dot(&dagg, uvec);
                        let w = hc.alpha[i][pos];
                        match *t {
                            NeighborRef::SelfLoop => {
                                for d in 0..ls.out_dim {
                                    *du.at_mut(i, d) += w * dagg[d];
                                }
                            }
                            NeighborRef::Internal { node, .. } => {
                                for d in 0..ls.out_dim {
                                    *du.at_mut(node, d) += w * dagg[d];
                                }
                            }
                            NeighborRef::Ghost { .. } => {}
                        }
                    }

                    if !self.spec.uniform_attention {
                        let s: f64 = hc.alpha[i]
                            .iter()
                            .zip(&dalpha_buf)
                            .map(|(&a, &g)| a * g)
                            .sum();
                        for (pos, t) in nbrs[i].iter().enumerate() {
                            let de = hc.alpha[i][pos] * (dalpha_buf[pos] - s);
                            if de == 0.0 {
                                continue;
                            }
                            let drho = de * leaky_relu_grad(hc.rho[i][pos], slope);
                            let (uvec, z): (&[f64], &[f64]) = match *t {
                                NeighborRef::SelfLoop => (hc.u.row(i), &zero_edge),
                                NeighborRef::Internal { node, edge } => {
                                    (hc.u.row(node), &view.edges[edge].features)
                                }
                                NeighborRef::Ghost { ghost } => (
                                    &view.ghosts[ghost].messages[l][k],
                                    &view.ghosts[ghost].edge_features,
                                ),
                            };
                            let ui = hc.u.row(i);
                            for d in 0..ls.out_dim {
                                da[d] += drho * ui[d];
                                da[ls.out_dim + d] += drho * uvec[d];
                                *du.at_mut(i, d) += drho * hp.a[d];
                            }
                            for d in 0..self.spec.edge_dim {
                                da[2 * ls.out_dim + d] += drho * z[d];
                            }
                            match *t {
                                NeighborRef::SelfLoop => {
                                    for d in 0..ls.out_dim {
                                        *du.at_mut(i, d) += drho * hp.a[ls.out_dim + d];
                                    }
                                }
                                NeighborRef::Internal { node, .. } => {
                                    for d in 0..ls.out_dim {
                                        *du.at_mut(node, d) += drho * hp.a[ls.out_dim + d];
                                    }
                                }
                                NeighborRef::Ghost { .. } => {}
                            }
                        }
                    }
                }

                // u = h_in Wᵀ: route du into dW and the previous layer.
                for i in 0..n {
                    let dui = du.row(i);
                    let hi = lc.h_in.row(i);
                    for o in 0..ls.out_dim {
                        let g = dui[o];
                        if g == 0.0 {
                            continue;
                        }
                        for c in 0..ls.in_dim {
                            *dw.at_mut(o, c) += g * hi[c];
                            *dh_prev.at_mut(i, c) += g * hp.w.at(o, c);
                        }
                    }
                }
            }

            if let Some(mask) = &lc.mask {
                for (d, m) in dh_prev.data.iter_mut().zip(&mask.data) {
                    *d *= m;
                }
            }
            dh = dh_prev;
        }

        let mut grad = Vec::with_capacity(self.spec.n_params());
        for heads in &layer_grads {
            for (dw, da) in heads {
                grad.extend_from_slice(&dw.data);
                grad.extend_from_slice(da);
            }
        }
        grad.extend_from_slice(&d_out_w);
        grad.push(d_out_b);

        if lambda > 0.0 {
            if let Some(anchor) = anchor {
                let theta = self.flatten();
                for ((g, t), a) in grad.iter_mut().zip(&theta).zip(anchor) {
                    *g += 2.0 * lambda * (t - a);
                }
            }
        }
        grad
    }
}

struct HeadCache {
    u: Mat,
    /// Pre-activation attention scores per node per neighbor (empty rows in
    /// uniform-attention mode).
    rho: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    agg: Mat,
}

struct LayerCache {
    /// The input the layer actually multiplied (post-dropout).
    h_in: Mat,
    mask: Option<Mat>,
    heads: Vec<HeadCache>,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    h_final: Mat,
    probs: Vec<f64>,
}

impl Predictor for GatModel {
    fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    /// Order: layers outer to inner, heads in order, W row-major then a;
    /// then the output weights and bias. This is the `gat-flat-1` layout.
    fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.spec.n_params());
        for heads in &self.layers {
            for hp in heads {
                v.extend_from_slice(&hp.w.data);
                v.extend_from_slice(&hp.a);
            }
        }
        v.extend_from_slice(&self.out_w);
        v.push(self.out_b);
        v
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.spec.n_params() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector".into(),
                expected: self.spec.n_params(),
                actual: flat.len(),
            });
        }
        let mut m = self.clone();
        let mut at = 0;
        for (l, ls) in m.spec.layers.iter().enumerate() {
            for k in 0..ls.heads {
                let wlen = ls.out_dim * ls.in_dim;
                m.layers[l][k].w.data.copy_from_slice(&flat[at..at + wlen]);
                at += wlen;
                let alen = ls.attn_len(m.spec.edge_dim);
                m.layers[l][k].a.copy_from_slice(&flat[at..at + alen]);
                at += alen;
            }
        }
        let od = m.spec.output_dim();
        m.out_w.copy_from_slice(&flat[at..at + od]);
        at += od;
        m.out_b = flat[at];
        Ok(m)
    }

    fn predict(&self, view: &GraphView) -> Result<Vec<f64>> {
        self.check_view(view)?;
        let nbrs = neighborhoods(view);
        Ok(self.forward_cached(view, &nbrs, None).probs)
    }

    fn loss(
        &self,
        view: &GraphView,
        nodes: &[usize],
        labels: &[u8],
        anchor: Option<&[f64]>,
        lambda: f64,
    ) -> Result<f64> {
        let probs = self.predict(view)?;
        let data = bce_mean(&probs, nodes, labels)?;
        Ok(data + proximal_term(&self.flatten(), anchor, lambda))
    }

    fn loss_grad(
        &self,
        view: &GraphView,
        nodes: &[usize],
        labels: &[u8],
        anchor: Option<&[f64]>,
        lambda: f64,
        dropout: Option<(&mut ChaCha12Rng, f64)>,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_view(view)?;
        let nbrs = neighborhoods(view);
        let cache = self.forward_cached(view, &nbrs, dropout);
        let data = bce_mean(&cache.probs, nodes, labels)?;
        let loss = data + proximal_term(&self.flatten(), anchor, lambda);
        let grad = self.backward(view, &nbrs, &cache, nodes, labels, anchor, lambda);
        Ok((loss, grad))
    }

    fn cached_representations(&self, view: &GraphView) -> Result<Option<Vec<Mat>>> {
        Ok(Some(self.forward_representations(view)?))
    }

    fn boundary_messages(&self, reps: &[Mat], node: usize) -> Option<Vec<Vec<Vec<f64>>>> {
        Some(
            self.layers
                .iter()
                .enumerate()
                .map(|(l, heads)| {
                    let x = reps[l].row(node);
                    heads
                        .iter()
                        .map(|hp| (0..hp.w.rows).map(|r| dot(hp.w.row(r), x)).collect())
                        .collect()
                })
                .collect(),
        )
    }

    fn empty_messages(&self) -> Option<Vec<Vec<Vec<f64>>>> {
        Some(
            self.spec
                .layers
                .iter()
                .map(|l| vec![vec![0.0; l.out_dim]; l.heads])
                .collect(),
        )
    }
}
