//! Feature-only baseline: a two-layer perceptron over node features. Edges
//! and ghost messages in the view are ignored, which is exactly the point of
//! the baseline.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::gnn::gat::BIAS_PRIOR;
use crate::gnn::view::GraphView;
use crate::gnn::{bce_mean, logit_grad, proximal_term, Predictor};
use crate::linalg::{dot, leaky_relu, leaky_relu_grad, sigmoid, Mat};

#[derive(Clone, Debug)]
pub struct MlpModel {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub negative_slope: f64,
}

impl MlpModel {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha12Rng) -> Self {
        let bound1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let mut w1 = Mat::zeros(hidden, input_dim);
        for v in &mut w1.data {
            *v = rng.gen_range(-bound1..bound1);
        }
        let bound2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w2 = (0..hidden).map(|_| rng.gen_range(-bound2..bound2)).collect();
        MlpModel {
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: (BIAS_PRIOR / (1.0 - BIAS_PRIOR)).ln(),
            negative_slope: 0.2,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols
    }

    fn check_view(&self, view: &GraphView) -> Result<()> {
        if view.features.cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "view feature width".into(),
                expected: self.input_dim(),
                actual: view.features.cols,
            });
        }
        Ok(())
    }

    fn forward_node(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let h = self.hidden_dim();
        let mut z1 = vec![0.0; h];
        let mut a1 = vec![0.0; h];
        for o in 0..h {
            z1[o] = dot(self.w1.row(o), x) + self.b1[o];
            a1[o] = leaky_relu(z1[o], self.negative_slope);
        }
        let logit = dot(&self.w2, &a1) + self.b2;
        (z1, a1, logit)
    }
}

impl Predictor for MlpModel {
    fn n_params(&self) -> usize {
        self.w1.data.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Order: w1 row-major, b1, w2, b2 (`mlp-flat-1` layout).
    fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w1.data);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector".into(),
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut m = self.clone();
        let (n1, nb, n2) = (m.w1.data.len(), m.b1.len(), m.w2.len());
        let mut at = 0;
        m.w1.data.copy_from_slice(&flat[at..at + n1]);
        at += n1;
        m.b1.copy_from_slice(&flat[at..at + nb]);
        at += nb;
        m.w2.copy_from_slice(&flat[at..at + n2]);
        at += n2;
        m.b2 = flat[at];
        Ok(m)
    }

    fn predict(&self, view: &GraphView) -> Result<Vec<f64>> {
        self.check_view(view)?;
        Ok((0..view.n_nodes())
            .map(|i| sigmoid(self.forward_node(view.features.row(i)).2))
            .collect())
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
        _dropout: Option<(&mut ChaCha12Rng, f64)>,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_view(view)?;
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
        let h = self.hidden_dim();
        let d = self.input_dim();
        let inv_b = 1.0 / nodes.len() as f64;
        let mut dw1 = Mat::zeros(h, d);
        let mut db1 = vec![0.0; h];
        let mut dw2 = vec![0.0; h];
        let mut db2 = 0.0;
        let mut data_loss = 0.0;

        for (&i, &y) in nodes.iter().zip(labels) {
            let x = view.features.row(i);
            let (z1, a1, logit) = self.forward_node(x);
            let p = sigmoid(logit);
            data_loss += super::clamped_bce(p, y) * inv_b;
            let g = logit_grad(p, y, inv_b);
            if g == 0.0 {
                continue;
            }
            db2 += g;
            for o in 0..h {
                dw2[o] += g * a1[o];
                let dz = g * self.w2[o] * leaky_relu_grad(z1[o], self.negative_slope);
                db1[o] += dz;
                for c in 0..d {
                    *dw1.at_mut(o, c) += dz * x[c];
                }
            }
        }

        let mut grad = Vec::with_capacity(self.n_params());
        grad.extend_from_slice(&dw1.data);
        grad.extend_from_slice(&db1);
        grad.extend_from_slice(&dw2);
        grad.push(db2);

        let loss = data_loss + proximal_term(&self.flatten(), anchor, lambda);
        if lambda > 0.0 {
            if let Some(anchor) = anchor {
                let theta = self.flatten();
                for ((g, t), a) in grad.iter_mut().zip(&theta).zip(anchor) {
                    *g += 2.0 * lambda * (t - a);
                }
            }
        }
        Ok((loss, grad))
    }
}
