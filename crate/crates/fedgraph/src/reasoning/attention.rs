//! Causal attention over event sequences: each event attends only to itself
//! and earlier events, producing per-row distributions that the rule engine
//! reads as temporal-dependence evidence.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, softmax_inplace, Mat};
use crate::reasoning::history::{event_embeddings, TransactionHistory};

/// Query/key projections over 5-dimensional event embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalAttentionParams {
    pub wq: Mat,
    pub wk: Mat,
}

impl CausalAttentionParams {
    /// Random projections with a 1/sqrt(fan-in) scale.
    pub fn init(d_k: usize, embed_dim: usize, rng: &mut ChaCha12Rng) -> Self {
        let scale = 1.0 / (embed_dim.max(1) as f64).sqrt();
        let mut mk = |_| {
            let mut m = Mat::zeros(d_k, embed_dim);
            for v in m.data.iter_mut() {
                *v = rng.gen_range(-scale..scale);
            }
            m
        };
        CausalAttentionParams {
            wq: mk(0),
            wk: mk(1),
        }
    }

    pub fn d_k(&self) -> usize {
        self.wq.rows
    }

    pub fn validate(&self) -> Result<()> {
        if self.wq.rows == 0 {
            return Err(Error::Config("key dimension must be positive".into()));
        }
        if self.wq.rows != self.wk.rows || self.wq.cols != self.wk.cols {
            return Err(Error::DimensionMismatch {
                context: "query/key projection shapes".into(),
                expected: self.wq.data.len(),
                actual: self.wk.data.len(),
            });
        }
        if self.wq.data.iter().chain(&self.wk.data).any(|v| !v.is_finite()) {
            return Err(Error::Config("attention projections must be finite".into()));
        }
        Ok(())
    }
}

/// Lower-triangular score matrix: row j is a softmax distribution over
/// positions 0..=j; everything above the diagonal is exactly zero.
pub fn causal_attention(
    history: &TransactionHistory,
    params: &CausalAttentionParams,
) -> Result<Mat> {
    params.validate()?;
    let n = history.events.len();
    if n == 0 {
        return Err(Error::Config(
            "causal attention needs at least one event".into(),
        ));
    }
    let embed = event_embeddings(history);
    if embed.cols != params.wq.cols {
        return Err(Error::DimensionMismatch {
            context: "event embedding width".into(),
            expected: params.wq.cols,
            actual: embed.cols,
        });
    }
    let d_k = params.d_k();
    let project = |w: &Mat, x: &[f64]| -> Vec<f64> {
        (0..w.rows).map(|r| dot(w.row(r), x)).collect()
    };
    let queries: Vec<Vec<f64>> = (0..n).map(|i| project(&params.wq, embed.row(i))).collect();
    let keys: Vec<Vec<f64>> = (0..n).map(|i| project(&params.wk, embed.row(i))).collect();

    let scale = 1.0 / (d_k as f64).sqrt();
    let mut scores = Mat::zeros(n, n);
    for j in 0..n {
        let mut row: Vec<f64> = (0..=j)
            .map(|i| dot(&queries[j], &keys[i]) * scale)
            .collect();
        softmax_inplace(&mut row);
        scores.row_mut(j)[..=j].copy_from_slice(&row);
    }
    Ok(scores)
}
