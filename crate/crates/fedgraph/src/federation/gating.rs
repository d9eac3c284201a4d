//! Gating network and mixture-of-experts arithmetic: a two-layer perceptron
//! maps node features to a distribution over clients, predictions mix as a
//! convex combination, and an entropy term keeps the gate from collapsing
//! onto a single expert.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::PROB_CLAMP;
use crate::linalg::{leaky_relu, leaky_relu_grad, softmax_inplace, Mat};

pub const GATING_SLOPE: f64 = 0.2;

/// Two-layer perceptron mapping a node feature vector to K expert logits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GatingParams {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl GatingParams {
    pub fn init(input_dim: usize, hidden: usize, n_experts: usize, rng: &mut ChaCha12Rng) -> Self {
        let glorot = |rows: usize, cols: usize, rng: &mut ChaCha12Rng| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let mut m = Mat::zeros(rows, cols);
            for v in m.data.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            m
        };
        GatingParams {
            w1: glorot(hidden, input_dim, rng),
            b1: vec![0.0; hidden],
            w2: glorot(n_experts, hidden, rng),
            b2: vec![0.0; n_experts],
        }
    }

    pub fn n_experts(&self) -> usize {
        self.w2.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols
    }

    pub fn n_params(&self) -> usize {
        self.w1.data.len() + self.b1.len() + self.w2.data.len() + self.b2.len()
    }

    /// Order: w1 row-major, b1, w2 row-major, b2.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        flat.extend_from_slice(&self.w1.data);
        flat.extend_from_slice(&self.b1);
        flat.extend_from_slice(&self.w2.data);
        flat.extend_from_slice(&self.b2);
        flat
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "gating parameter vector".into(),
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut out = self.clone();
        let (n1, nb1, n2) = (out.w1.data.len(), out.b1.len(), out.w2.data.len());
        out.w1.data.copy_from_slice(&flat[..n1]);
        out.b1.copy_from_slice(&flat[n1..n1 + nb1]);
        out.w2.data.copy_from_slice(&flat[n1 + nb1..n1 + nb1 + n2]);
        out.b2.copy_from_slice(&flat[n1 + nb1 + n2..]);
        Ok(out)
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hidden = self.w1.rows;
        let mut z1 = vec![0.0; hidden];
        for (h, z) in z1.iter_mut().enumerate() {
            *z = self.b1[h] + crate::linalg::dot(self.w1.row(h), x);
        }
        let a1: Vec<f64> = z1.iter().map(|&z| leaky_relu(z, GATING_SLOPE)).collect();
        let mut logits = vec![0.0; self.n_experts()];
        for (k, l) in logits.iter_mut().enumerate() {
            *l = self.b2[k] + crate::linalg::dot(self.w2.row(k), &a1);
        }
        (z1, a1, logits)
    }
}

/// Distribution over experts for one node: softmax of the gating network's
/// logits.
pub fn gate_weights(gating: &GatingParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != gating.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "gating input features".into(),
            expected: gating.input_dim(),
            actual: x.len(),
        });
    }
    let (_, _, mut logits) = gating.forward(x);
    softmax_inplace(&mut logits);
    Ok(logits)
}

/// Mixture prediction Σ_k w_k·p_k.
pub fn moe_predict(expert_outputs: &[f64], w: &[f64]) -> Result<f64> {
    if expert_outputs.len() != w.len() {
        return Err(Error::DimensionMismatch {
            context: "expert outputs vs gate weights".into(),
            expected: w.len(),
            actual: expert_outputs.len(),
        });
    }
    check_distribution(w)?;
    Ok(expert_outputs.iter().zip(w).map(|(p, w)| p * w).sum())
}

fn check_distribution(w: &[f64]) -> Result<()> {
    if w.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Config("gate weights must be non-negative".into()));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("gate weights must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Shannon entropy −Σ w·ln w, with 0·ln 0 read as 0.
pub fn entropy(w: &[f64]) -> f64 {
    -w.iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum::<f64>()
}

/// Mixture training loss: mean cross-entropy of the gated mixture plus the
/// entropy term. With `diversity_bonus` (the default reading) mean entropy
/// is subtracted, rewarding spread-out gates; without it the term is added
/// as printed in the source formulation, penalizing spread.
pub fn moe_loss(
    expert_probs: &[Vec<f64>],
    labels: &[u8],
    gates: &[Vec<f64>],
    gamma: f64,
    diversity_bonus: bool,
) -> Result<f64> {
    validate_moe_batch(expert_probs, labels, gates, gamma)?;
    let b = labels.len() as f64;
    let mut ce = 0.0;
    let mut h = 0.0;
    for ((p, &y), w) in expert_probs.iter().zip(labels).zip(gates) {
        let mix = moe_predict(p, w)?;
        ce += crate::gnn::clamped_bce(mix, y);
        h += entropy(w);
    }
    let sign = if diversity_bonus { -1.0 } else { 1.0 };
    Ok(ce / b + sign * gamma * h / b)
}

fn validate_moe_batch(
    expert_probs: &[Vec<f64>],
    labels: &[u8],
    gates: &[Vec<f64>],
    gamma: f64,
) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if expert_probs.len() != labels.len() || gates.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "mixture batch".into(),
            expected: labels.len(),
            actual: expert_probs.len().min(gates.len()),
        });
    }
    if gamma < 0.0 {
        return Err(Error::Config(format!(
            "entropy weight must be non-negative, got {gamma}"
        )));
    }
    Ok(())
}

/// Mixture loss over a batch together with its gradient in `flatten` order,
/// treating the expert predictions as constants. Backpropagates through the
/// softmax gate and both perceptron layers.
pub fn gating_loss_grad(
    gating: &GatingParams,
    xs: &[&[f64]],
    expert_probs: &[Vec<f64>],
    labels: &[u8],
    gamma: f64,
    diversity_bonus: bool,
) -> Result<(f64, Vec<f64>)> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if expert_probs.len() != labels.len() || xs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "gating batch".into(),
            expected: labels.len(),
            actual: expert_probs.len().min(xs.len()),
        });
    }
    if gamma < 0.0 {
        return Err(Error::Config(format!(
            "entropy weight must be non-negative, got {gamma}"
        )));
    }
    let sign = if diversity_bonus { -1.0 } else { 1.0 };
    let b = labels.len() as f64;
    let k = gating.n_experts();
    let hidden = gating.w1.rows;

    let mut loss = 0.0;
    let mut dw1 = Mat::zeros(gating.w1.rows, gating.w1.cols);
    let mut db1 = vec![0.0; hidden];
    let mut dw2 = Mat::zeros(gating.w2.rows, gating.w2.cols);
    let mut db2 = vec![0.0; k];

    for ((&x, p), &y) in xs.iter().zip(expert_probs).zip(labels) {
        if x.len() != gating.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "gating input features".into(),
                expected: gating.input_dim(),
                actual: x.len(),
            });
        }
        if p.len() != k {
            return Err(Error::DimensionMismatch {
                context: "expert outputs".into(),
                expected: k,
                actual: p.len(),
            });
        }
        let (z1, a1, mut w) = gating.forward(x);
        softmax_inplace(&mut w);
        let mix: f64 = p.iter().zip(&w).map(|(p, w)| p * w).sum();
        loss += crate::gnn::clamped_bce(mix, y) / b;
        loss += sign * gamma * entropy(&w) / b;

        // d loss / d gate weights; the clamp zeroes the CE branch exactly as
        // in the loss.
        let clamped = mix.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let dce_dmix = if mix <= PROB_CLAMP || mix >= 1.0 - PROB_CLAMP {
            0.0
        } else {
            (clamped - y as f64) / (clamped * (1.0 - clamped))
        };
        let dw_vec: Vec<f64> = (0..k)
            .map(|j| {
                let dh = -(w[j].max(1e-300).ln() + 1.0);
                (dce_dmix * p[j] + sign * gamma * dh) / b
            })
            .collect();
        // Softmax backward: dz_j = w_j (dw_j − Σ_i dw_i w_i).
        let inner: f64 = dw_vec.iter().zip(&w).map(|(d, w)| d * w).sum();
        let dz2: Vec<f64> = (0..k).map(|j| w[j] * (dw_vec[j] - inner)).collect();

        let mut da1 = vec![0.0; hidden];
        for j in 0..k {
            db2[j] += dz2[j];
            for (h, &a) in a1.iter().enumerate() {
                *dw2.at_mut(j, h) += dz2[j] * a;
                da1[h] += gating.w2.at(j, h) * dz2[j];
            }
        }
        for h in 0..hidden {
            let dz1 = da1[h] * leaky_relu_grad(z1[h], GATING_SLOPE);
            db1[h] += dz1;
            for (c, &xv) in x.iter().enumerate() {
                *dw1.at_mut(h, c) += dz1 * xv;
            }
        }
    }

    let mut grad = Vec::with_capacity(gating.n_params());
    grad.extend_from_slice(&dw1.data);
    grad.extend_from_slice(&db1);
    grad.extend_from_slice(&dw2.data);
    grad.extend_from_slice(&db2);
    Ok((loss, grad))
}
