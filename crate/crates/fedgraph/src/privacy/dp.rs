//! Gaussian-mechanism primitives: L2 clipping, the calibrated noise scale,
//! and the noisy release step clients apply to updates before they leave
//! the jurisdiction.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::l2_norm;
use crate::rng::normal;

/// Parameters for one noisy release of a clipped update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpNoiseConfig {
    /// L2 clipping bound S.
    pub clip_norm: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Replaces the calibrated noise multiplier when set; 0 disables noise
    /// entirely (useful for isolating the rest of the pipeline).
    #[serde(default)]
    pub sigma_override: Option<f64>,
}

impl Default for DpNoiseConfig {
    fn default() -> Self {
        Self {
            clip_norm: 1.0,
            epsilon: 1.0,
            delta: 1e-5,
            sigma_override: None,
        }
    }
}

impl DpNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.clip_norm.is_finite() || self.clip_norm <= 0.0 {
            return Err(Error::PrivacyParam(format!(
                "clip_norm must be positive and finite, got {}",
                self.clip_norm
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::PrivacyParam(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::PrivacyParam(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if let Some(sigma) = self.sigma_override {
            if !sigma.is_finite() || sigma < 0.0 {
                return Err(Error::PrivacyParam(format!(
                    "sigma_override must be non-negative and finite, got {sigma}"
                )));
            }
        }
        Ok(())
    }

    /// Effective noise multiplier: the override when present, otherwise the
    /// calibrated value.
    pub fn sigma(&self) -> f64 {
        self.sigma_override
            .unwrap_or_else(|| noise_sigma(self.clip_norm, self.epsilon, self.delta))
    }
}

/// Scale `update` so its L2 norm is at most `clip_norm`; shorter vectors
/// pass through untouched.
pub fn clip_update(update: &[f64], clip_norm: f64) -> Vec<f64> {
    let norm = l2_norm(update);
    if norm <= clip_norm || norm == 0.0 {
        return update.to_vec();
    }
    let scale = clip_norm / norm;
    update.iter().map(|v| v * scale).collect()
}

/// Noise multiplier (S/ε)·√(2·ln(1.25/δ)) calibrated to (ε, δ) for an
/// update with L2 sensitivity S.
pub fn noise_sigma(clip_norm: f64, epsilon: f64, delta: f64) -> f64 {
    (clip_norm / epsilon) * (2.0 * (1.25 / delta).ln()).sqrt()
}

/// Add i.i.d. Gaussian noise with per-coordinate standard deviation σ·S to
/// an already-clipped update. Inputs longer than the clipping bound are
/// rejected rather than silently re-clipped: clipping is the caller's step,
/// and skipping it would void the calibration.
pub fn gaussian_mechanism(
    update: &[f64],
    config: &DpNoiseConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    config.validate()?;
    let norm = l2_norm(update);
    if norm > config.clip_norm + 1e-9 {
        return Err(Error::UnclippedInput {
            norm,
            bound: config.clip_norm,
        });
    }
    let std = config.sigma() * config.clip_norm;
    if std == 0.0 {
        return Ok(update.to_vec());
    }
    Ok(update.iter().map(|v| v + std * normal(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;

    #[test]
    fn clip_scales_long_vector() {
        let clipped = clip_update(&[3.0, 4.0], 1.0);
        assert!((clipped[0] - 0.6).abs() < 1e-15);
        assert!((clipped[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clip_leaves_short_vector_bitwise_identical() {
        let v = [0.1, -0.2, 0.05];
        assert_eq!(clip_update(&v, 1.0), v.to_vec());
        assert_eq!(clip_update(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn sigma_matches_frozen_values() {
        // sqrt(2·ln(1.25e5)) evaluated independently at full precision.
        let s = noise_sigma(1.0, 1.0, 1e-5);
        assert!((s - 4.844805262605389).abs() < 1e-12);
        assert!((s - 4.84475).abs() < 1e-4);
        assert!((noise_sigma(1.0, 10.0, 1e-5) - 0.4844805262605389).abs() < 1e-12);
    }

    #[test]
    fn sigma_is_linear_in_clip_norm() {
        let base = noise_sigma(1.0, 2.0, 1e-6);
        assert!((noise_sigma(3.0, 2.0, 1e-6) - 3.0 * base).abs() < 1e-12);
        assert!((noise_sigma(0.5, 2.0, 1e-6) - 0.5 * base).abs() < 1e-12);
    }

    #[test]
    fn mechanism_rejects_unclipped_input() {
        let config = DpNoiseConfig::default();
        let mut rng = derive_rng(1, "dp", &[]);
        let err = gaussian_mechanism(&[3.0, 4.0], &config, &mut rng).unwrap_err();
        match err {
            Error::UnclippedInput { norm, bound } => {
                assert!((norm - 5.0).abs() < 1e-12);
                assert!((bound - 1.0).abs() < 1e-12);
            }
            other => panic!("expected UnclippedInput, got {other:?}"),
        }
    }

    #[test]
    fn mechanism_tolerates_rounding_at_the_bound() {
        let config = DpNoiseConfig {
            sigma_override: Some(0.0),
            ..DpNoiseConfig::default()
        };
        let mut rng = derive_rng(1, "dp", &[]);
        // Norm exactly at the bound plus well under the 1e-9 slack.
        let v = clip_update(&[3.0, 4.0], 1.0);
        assert!(gaussian_mechanism(&v, &config, &mut rng).is_ok());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let config = DpNoiseConfig {
            sigma_override: Some(0.0),
            ..DpNoiseConfig::default()
        };
        let mut rng = derive_rng(7, "dp", &[]);
        let v = [0.25, -0.5, 0.125];
        let out = gaussian_mechanism(&v, &config, &mut rng).unwrap();
        assert_eq!(out, v.to_vec());
    }

    #[test]
    fn mechanism_is_deterministic_for_a_seed() {
        let config = DpNoiseConfig::default();
        let v = [0.1, 0.2, -0.3];
        let a = gaussian_mechanism(&v, &config, &mut derive_rng(42, "dp", &[0])).unwrap();
        let b = gaussian_mechanism(&v, &config, &mut derive_rng(42, "dp", &[0])).unwrap();
        let c = gaussian_mechanism(&v, &config, &mut derive_rng(42, "dp", &[1])).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_noise_std_matches_unit_target() {
        // sigma·S = 1 exactly; one million draws pin the sample std.
        let config = DpNoiseConfig {
            sigma_override: Some(1.0),
            ..DpNoiseConfig::default()
        };
        let mut rng = derive_rng(3, "dp-std", &[]);
        let zeros = vec![0.0; 1_000_000];
        let noised = gaussian_mechanism(&zeros, &config, &mut rng).unwrap();
        let n = noised.len() as f64;
        let mean = noised.iter().sum::<f64>() / n;
        let var = noised.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!(
            (var.sqrt() - 1.0).abs() < 0.005,
            "sample std {} strayed from 1.0",
            var.sqrt()
        );
    }

    #[test]
    fn noise_mean_is_centered_on_the_input() {
        // 1e5 independent releases of the same scalar; the empirical mean
        // must sit within three standard errors of the true value.
        let config = DpNoiseConfig {
            sigma_override: Some(1.0),
            ..DpNoiseConfig::default()
        };
        let trials = 100_000usize;
        let mut sum = 0.0;
        for t in 0..trials {
            let mut rng = derive_rng(11, "dp-mean", &[t as u64]);
            sum += gaussian_mechanism(&[0.5], &config, &mut rng).unwrap()[0];
        }
        let mean = sum / trials as f64;
        let three_se = 3.0 / (trials as f64).sqrt();
        assert!(
            (mean - 0.5).abs() < three_se,
            "mean {mean} outside 0.5 ± {three_se}"
        );
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let base = DpNoiseConfig::default();
        for bad in [
            DpNoiseConfig { clip_norm: 0.0, ..base.clone() },
            DpNoiseConfig { clip_norm: f64::NAN, ..base.clone() },
            DpNoiseConfig { epsilon: -1.0, ..base.clone() },
            DpNoiseConfig { epsilon: f64::INFINITY, ..base.clone() },
            DpNoiseConfig { delta: 0.0, ..base.clone() },
            DpNoiseConfig { delta: 1.0, ..base.clone() },
            DpNoiseConfig { sigma_override: Some(-0.1), ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::PrivacyParam(_))));
        }
        assert!(base.validate().is_ok());
    }

    proptest! {
        #[test]
        fn clipped_norm_never_exceeds_bound(
            v in proptest::collection::vec(-100.0f64..100.0, 1..64),
            s in 0.1f64..10.0,
        ) {
            let clipped = clip_update(&v, s);
            prop_assert!(l2_norm(&clipped) <= s * (1.0 + 1e-12));
        }

        #[test]
        fn clip_is_idempotent(
            v in proptest::collection::vec(-100.0f64..100.0, 1..64),
            s in 0.1f64..10.0,
        ) {
            let once = clip_update(&v, s);
            let twice = clip_update(&once, s);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
