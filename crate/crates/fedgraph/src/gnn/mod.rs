//! Models and local training: the attention network, a feature-only
//! perceptron baseline, the Adam optimizer, and checkpoint files.

pub mod checkpoint;
pub mod gat;
pub mod mlp;
pub mod optim;
pub mod train;
pub mod view;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use gat::{GatModel, HeadParams, LayerSpec, ModelSpec};
pub use mlp::MlpModel;
pub use optim::Adam;
pub use train::{local_train, Hyperparams};
pub use view::{GhostNeighbor, GraphView, NeighborRef, ViewEdge};

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Probabilities are clamped to this band inside the cross-entropy so a
/// saturated prediction cannot produce log(0).
pub const PROB_CLAMP: f64 = 1e-7;

/// A trainable per-node binary classifier over a graph view.
///
/// Parameters flatten to a fixed documented order so optimizer state,
/// aggregation, and checkpoints all operate on plain vectors.
pub trait Predictor: Clone + Send + Sync {
    fn n_params(&self) -> usize;
    fn flatten(&self) -> Vec<f64>;
    /// Same shape, new values. Errors if the vector length is wrong.
    fn with_flat(&self, flat: &[f64]) -> Result<Self>
    where
        Self: Sized;
    /// Per-node probability in (0,1), deterministic.
    fn predict(&self, view: &GraphView) -> Result<Vec<f64>>;
    /// Mean clamped cross-entropy over `nodes` plus `lambda·‖θ−anchor‖²`.
    fn loss(
        &self,
        view: &GraphView,
        nodes: &[usize],
        labels: &[u8],
        anchor: Option<&[f64]>,
        lambda: f64,
    ) -> Result<f64>;
    /// Loss together with its gradient in `flatten` order. Dropout (rate in
    /// [0,1)) applies only when an rng is supplied; models without a dropout
    /// site ignore it.
    fn loss_grad(
        &self,
        view: &GraphView,
        nodes: &[usize],
        labels: &[u8],
        anchor: Option<&[f64]>,
        lambda: f64,
        dropout: Option<(&mut ChaCha12Rng, f64)>,
    ) -> Result<(f64, Vec<f64>)>;
    /// Per-layer representations cached between aggregation rounds so
    /// boundary messages can be derived from them; None for models that
    /// pass no messages.
    fn cached_representations(&self, _view: &GraphView) -> Result<Option<Vec<Mat>>> {
        Ok(None)
    }
    /// `messages[layer][head]` this model would send for `node`, computed
    /// from cached representations; None for models that pass no messages.
    fn boundary_messages(&self, _reps: &[Mat], _node: usize) -> Option<Vec<Vec<Vec<f64>>>> {
        None
    }
    /// Zero-valued messages in this model's shape, for priming ghost slots
    /// before the first exchange; None for models that pass no messages.
    fn empty_messages(&self) -> Option<Vec<Vec<Vec<f64>>>> {
        None
    }
}

pub(crate) fn clamped_bce(p: f64, y: u8) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean cross-entropy over the selected nodes. Errors on an empty batch or a
/// length mismatch between nodes and labels.
pub(crate) fn bce_mean(probs: &[f64], nodes: &[usize], labels: &[u8]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if nodes.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "labels for batch".into(),
            expected: nodes.len(),
            actual: labels.len(),
        });
    }
    let mut s = 0.0;
    for (&i, &y) in nodes.iter().zip(labels) {
        s += clamped_bce(probs[i], y);
    }
    Ok(s / nodes.len() as f64)
}

pub(crate) fn proximal_term(theta: &[f64], anchor: Option<&[f64]>, lambda: f64) -> f64 {
    match anchor {
        Some(a) if lambda > 0.0 => {
            lambda * theta.iter().zip(a).map(|(t, g)| (t - g) * (t - g)).sum::<f64>()
        }
        _ => 0.0,
    }
}

/// d(mean clamped BCE)/d(logit) for one sample. Zero when the clamp is
/// active, mirroring the loss branch.
pub(crate) fn logit_grad(p: f64, y: u8, inv_batch: f64) -> f64 {
    if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
        0.0
    } else {
        (p - y as f64) * inv_batch
    }
}
