//! Privacy stack applied to model updates before they leave a client:
//! clip, add calibrated Gaussian noise, secret-share for aggregation, and
//! (for cross-border payloads) encrypt under the receiving jurisdiction's
//! homomorphic key. Budget spend is tracked in a ledger with two
//! composition rules.

mod dp;
mod ledger;
mod paillier;
mod sharing;

pub use dp::{clip_update, gaussian_mechanism, noise_sigma, DpNoiseConfig};
pub use ledger::{compose_budget, Accountant, BudgetReport, PrivacyLedger, RoundSpend};
pub use paillier::{Ciphertext, PaillierKeyPair, PaillierPublic, DEFAULT_KEY_BITS, MIN_KEY_BITS};
pub use sharing::{decode_fixed, encode_fixed, reconstruct, share_vector, FIXED_SCALE_BITS};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    /// Summing secret shares of noised updates must agree with summing the
    /// noised updates directly, up to fixed-point quantization — the server
    /// learns the aggregate and nothing else, at no cost to accuracy.
    #[test]
    fn share_pipeline_preserves_the_noised_sum() {
        let config = DpNoiseConfig {
            clip_norm: 1.0,
            sigma_override: Some(0.05),
            ..DpNoiseConfig::default()
        };
        let updates = [
            vec![0.9, -0.3, 0.1, 0.2],
            vec![-0.4, 0.6, 0.5, -0.1],
            vec![0.2, 0.2, -0.8, 0.3],
        ];
        let mut noised = Vec::new();
        let mut pooled_shares = Vec::new();
        for (k, update) in updates.iter().enumerate() {
            let clipped = clip_update(update, config.clip_norm);
            let mut noise_rng = derive_rng(31, "pipeline-noise", &[k as u64]);
            let released = gaussian_mechanism(&clipped, &config, &mut noise_rng).unwrap();
            let mut share_rng = derive_rng(31, "pipeline-share", &[k as u64]);
            pooled_shares.extend(share_vector(&released, 3, &mut share_rng).unwrap());
            noised.push(released);
        }
        let via_shares = reconstruct(&pooled_shares).unwrap();
        for i in 0..4 {
            let direct: f64 = noised.iter().map(|u| u[i]).sum();
            assert!(
                (via_shares[i] - direct).abs() <= 3.0 / 65536.0,
                "coordinate {i}: {} vs {direct}",
                via_shares[i]
            );
        }
    }
}
