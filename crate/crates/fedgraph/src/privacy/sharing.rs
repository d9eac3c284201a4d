//! Additive secret sharing over ℤ_{2^64} with 16-bit fixed-point encoding.
//!
//! A vector is encoded coordinate-wise into ring elements, split into
//! random summands, and recovered by wrapping addition. Because the scheme
//! is additive, pooling every client's shares and reconstructing yields the
//! sum of the clients' vectors — the only value the server ever sees.

use rand::RngCore;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Fixed-point scale: values are stored in units of 2⁻¹⁶.
pub const FIXED_SCALE_BITS: u32 = 16;
const FIXED_SCALE: f64 = (1u64 << FIXED_SCALE_BITS) as f64;
/// Encoded magnitudes stay below 2⁴⁷ so that sums across any realistic
/// number of clients cannot wrap past the sign bit.
const MAX_ENCODED: f64 = (1u64 << 47) as f64;

/// Encode a value into the ring as a two's-complement fixed-point word.
pub fn encode_fixed(value: f64) -> Result<u64> {
    if !value.is_finite() {
        return Err(Error::FixedPointRange { value });
    }
    let scaled = (value * FIXED_SCALE).round();
    if scaled.abs() >= MAX_ENCODED {
        return Err(Error::FixedPointRange { value });
    }
    Ok((scaled as i64) as u64)
}

/// Decode a ring element back to a float, interpreting the word as a signed
/// fixed-point number.
pub fn decode_fixed(word: u64) -> f64 {
    (word as i64) as f64 / FIXED_SCALE
}

/// Split `values` into `n_shares` vectors of ring elements whose wrapping
/// sum reconstructs the encoded input. All but the last share are drawn
/// uniformly from the ring, so any subset that omits one share carries no
/// information about the values.
pub fn share_vector(
    values: &[f64],
    n_shares: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<Vec<u64>>> {
    if n_shares == 0 {
        return Err(Error::Config("need at least one share".into()));
    }
    let mut shares = vec![vec![0u64; values.len()]; n_shares];
    for (i, &value) in values.iter().enumerate() {
        let encoded = encode_fixed(value)?;
        let mut acc = 0u64;
        for share in shares.iter_mut().take(n_shares - 1) {
            let word = rng.next_u64();
            share[i] = word;
            acc = acc.wrapping_add(word);
        }
        shares[n_shares - 1][i] = encoded.wrapping_sub(acc);
    }
    Ok(shares)
}

/// Wrapping-sum all share vectors and decode. Pass one client's shares to
/// recover that client's vector, or every client's shares to recover the
/// sum of all vectors.
pub fn reconstruct(shares: &[Vec<u64>]) -> Result<Vec<f64>> {
    let Some(first) = shares.first() else {
        return Err(Error::Config("no shares to reconstruct from".into()));
    };
    let dim = first.len();
    let mut acc = vec![0u64; dim];
    for share in shares {
        if share.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "secret share vectors must all have equal length".into(),
                expected: dim,
                actual: share.len(),
            });
        }
        for (a, w) in acc.iter_mut().zip(share) {
            *a = a.wrapping_add(*w);
        }
    }
    Ok(acc.into_iter().map(decode_fixed).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;

    const QUANTUM: f64 = 1.0 / 65536.0;

    #[test]
    fn encode_decode_is_within_one_quantum() {
        for &v in &[0.0, 1.0, -1.0, 0.123456, -98765.4321, 1e6] {
            let back = decode_fixed(encode_fixed(v).unwrap());
            assert!((back - v).abs() <= QUANTUM, "{v} -> {back}");
        }
    }

    #[test]
    fn encode_rejects_values_at_the_range_limit() {
        // 2^47 scaled units correspond to 2^31 in value units.
        let limit = 2_147_483_648.0;
        assert!(matches!(
            encode_fixed(limit),
            Err(Error::FixedPointRange { .. })
        ));
        assert!(matches!(
            encode_fixed(-limit),
            Err(Error::FixedPointRange { .. })
        ));
        assert!(matches!(
            encode_fixed(f64::NAN),
            Err(Error::FixedPointRange { .. })
        ));
        assert!(encode_fixed(limit - 1.0).is_ok());
        assert!(encode_fixed(-limit + 1.0).is_ok());
    }

    #[test]
    fn single_share_is_the_encoding_itself() {
        let mut rng = derive_rng(1, "shares", &[]);
        let shares = share_vector(&[1.5, -2.25], 1, &mut rng).unwrap();
        assert_eq!(shares.len(), 1);
        let back = reconstruct(&shares).unwrap();
        assert!((back[0] - 1.5).abs() <= QUANTUM);
        assert!((back[1] + 2.25).abs() <= QUANTUM);
    }

    #[test]
    fn three_client_share_sum_matches_plain_sum() {
        let clients = [
            vec![0.5, -1.25, 3.0, 0.0],
            vec![-0.75, 2.5, -3.5, 1.0],
            vec![1.125, 0.25, 0.5, -2.0],
        ];
        let mut pooled = Vec::new();
        for (k, values) in clients.iter().enumerate() {
            let mut rng = derive_rng(9, "shares", &[k as u64]);
            pooled.extend(share_vector(values, 3, &mut rng).unwrap());
        }
        let sum = reconstruct(&pooled).unwrap();
        for i in 0..4 {
            let plain: f64 = clients.iter().map(|v| v[i]).sum();
            assert!(
                (sum[i] - plain).abs() <= 3.0 * QUANTUM,
                "coordinate {i}: {} vs {plain}",
                sum[i]
            );
        }
    }

    #[test]
    fn zero_shares_and_ragged_shares_error() {
        let mut rng = derive_rng(2, "shares", &[]);
        assert!(matches!(
            share_vector(&[1.0], 0, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(matches!(reconstruct(&[]), Err(Error::Config(_))));
        let ragged = vec![vec![1u64, 2], vec![3u64]];
        assert!(matches!(
            reconstruct(&ragged),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn individual_shares_look_uniform() {
        // Share the same value repeatedly and bucket each share's top three
        // bits; every bucket should hold roughly trials/8.
        let trials = 8192usize;
        let mut counts = [[0usize; 8]; 2];
        for t in 0..trials {
            let mut rng = derive_rng(5, "shares-uniform", &[t as u64]);
            let shares = share_vector(&[123.456], 3, &mut rng).unwrap();
            counts[0][(shares[0][0] >> 61) as usize] += 1;
            counts[1][(shares[2][0] >> 61) as usize] += 1;
        }
        // Binomial std is ~30 here; 160 is beyond five sigmas.
        for row in &counts {
            for &c in row {
                assert!(
                    (c as i64 - 1024).unsigned_abs() < 160,
                    "bucket count {c} too far from uniform"
                );
            }
        }
    }

    #[test]
    fn share_pairs_look_jointly_uniform() {
        // Joint distribution of (share 0, share 1) top bits over 4 cells.
        let trials = 8192usize;
        let mut counts = [0usize; 4];
        for t in 0..trials {
            let mut rng = derive_rng(6, "shares-joint", &[t as u64]);
            let shares = share_vector(&[-42.0], 3, &mut rng).unwrap();
            let idx = ((shares[0][0] >> 63) << 1 | (shares[1][0] >> 63)) as usize;
            counts[idx] += 1;
        }
        for &c in &counts {
            assert!(
                (c as i64 - 2048).unsigned_abs() < 250,
                "joint bucket {c} too far from uniform"
            );
        }
    }

    #[test]
    fn sharing_is_deterministic_for_a_seed() {
        let v = [0.25, -0.75, 12.0];
        let a = share_vector(&v, 4, &mut derive_rng(3, "shares", &[7])).unwrap();
        let b = share_vector(&v, 4, &mut derive_rng(3, "shares", &[7])).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn share_then_reconstruct_roundtrips(
            v in proptest::collection::vec(-1e6f64..1e6, 1..32),
            n_shares in 1usize..6,
            seed in 0u64..1000,
        ) {
            let mut rng = derive_rng(seed, "shares-prop", &[]);
            let shares = share_vector(&v, n_shares, &mut rng).unwrap();
            let back = reconstruct(&shares).unwrap();
            for (orig, rec) in v.iter().zip(&back) {
                prop_assert!((orig - rec).abs() <= QUANTUM);
            }
        }
    }
}
