//! Local training: Adam over mini-batches of labeled nodes for a fixed
//! number of epochs, with the anchor (proximal) term pulling toward the
//! parameters the round started from.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::optim::Adam;
use crate::gnn::view::GraphView;
use crate::gnn::Predictor;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub layers: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub proximal_lambda: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            layers: 3,
            hidden_dim: 32,
            heads: 2,
            dropout_rate: 0.0,
            learning_rate: 1e-3,
            weight_decay: 5e-4,
            proximal_lambda: 0.01,
            local_epochs: 5,
            batch_size: 64,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_dim == 0 || self.heads == 0 || self.batch_size == 0 {
            return Err(Error::Config("model/batch dimensions must be positive".into()));
        }
        if self.hidden_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} must be divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must lie in [0,1)".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
            ("proximal_lambda", self.proximal_lambda),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}

/// E epochs of shuffled mini-batch Adam starting from `model`, anchored to
/// the starting parameters. Deterministic given the rng state. `client`
/// labels divergence errors only.
pub fn local_train<M: Predictor>(
    model: &M,
    view: &GraphView,
    nodes: &[usize],
    labels: &[u8],
    hyper: &Hyperparams,
    rng: &mut ChaCha12Rng,
    client: usize,
) -> Result<M> {
    hyper.validate()?;
    if nodes.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if nodes.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "labels for training set".into(),
            expected: nodes.len(),
            actual: labels.len(),
        });
    }
    let anchor = model.flatten();
    let mut theta = anchor.clone();
    let mut adam = Adam::new(theta.len(), hyper.learning_rate, hyper.weight_decay);
    let mut order: Vec<usize> = (0..nodes.len()).collect();

    for epoch in 0..hyper.local_epochs {
        crate::rng::shuffle(&mut order, rng);
        let mut at = 0;
        while at < order.len() {
            let end = (at + hyper.batch_size).min(order.len());
            let batch_nodes: Vec<usize> = order[at..end].iter().map(|&i| nodes[i]).collect();
            let batch_labels: Vec<u8> = order[at..end].iter().map(|&i| labels[i]).collect();
            let current = model.with_flat(&theta)?;
            let dropout = if hyper.dropout_rate > 0.0 {
                Some((&mut *rng, hyper.dropout_rate))
            } else {
                None
            };
            let (loss, grad) = current.loss_grad(
                view,
                &batch_nodes,
                &batch_labels,
                Some(&anchor),
                hyper.proximal_lambda,
                dropout,
            )?;
            if !loss.is_finite() {
                return Err(Error::Divergence { client, epoch });
            }
            adam.step(&mut theta, &grad);
            at = end;
        }
    }
    model.with_flat(&theta)
}
