//! Boundary message transport: fixed-point encoding, encryption under the
//! receiving jurisdiction's key (or a simulated stand-in at identical byte
//! cost), digest sealing, and byte accounting.
//!
//! Envelopes carry ciphertexts (or their quantized stand-ins) and routing
//! metadata only — never raw node features, labels, or representations.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::privacy::{decode_fixed, encode_fixed, Ciphertext, PaillierKeyPair};
use crate::rng::derive_rng;

/// How boundary payloads travel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CryptoMode {
    /// Quantized words stand in for ciphertexts; envelopes still report the
    /// byte cost real ciphertexts would have. Decoded values are identical
    /// to the encrypted path, so bulk runs use this.
    Simulated,
    /// Real encryption under the receiving jurisdiction's public key.
    Paillier,
}

/// Per-jurisdiction keypairs plus the configured key size.
pub struct KeyDirectory {
    bits: u64,
    keys: BTreeMap<u32, PaillierKeyPair>,
}

impl KeyDirectory {
    /// Directory with no keys — enough for simulated transport, where only
    /// the byte cost of the configured key size matters.
    pub fn simulated(bits: u64) -> Self {
        KeyDirectory {
            bits,
            keys: BTreeMap::new(),
        }
    }

    /// One keypair per jurisdiction, derived deterministically from the seed.
    pub fn generate(jurisdictions: &[u32], bits: u64, seed: u64) -> Result<Self> {
        let mut keys = BTreeMap::new();
        for &j in jurisdictions {
            let mut rng = derive_rng(seed, "jurisdiction-key", &[j as u64]);
            keys.insert(j, PaillierKeyPair::generate(bits, &mut rng)?);
        }
        Ok(KeyDirectory { bits, keys })
    }

    pub fn keypair(&self, jurisdiction: u32) -> Result<&PaillierKeyPair> {
        self.keys
            .get(&jurisdiction)
            .ok_or(Error::MissingKey(jurisdiction))
    }

    /// Serialized size of one ciphertext (an element of ℤ_{n²}).
    pub fn cipher_len(&self) -> usize {
        ((2 * self.bits + 7) / 8) as usize
    }
}

/// Wire payload: only group elements or their quantized stand-ins.
#[derive(Clone, Debug)]
pub enum Payload {
    Encrypted(Vec<Ciphertext>),
    Simulated(Vec<u64>),
}

/// One sealed boundary message for a single (edge, layer).
#[derive(Clone, Debug)]
pub struct MessageEnvelope {
    pub sender_client: usize,
    pub receiver_client: usize,
    pub receiver_jurisdiction: u32,
    pub layer: usize,
    pub payload: Payload,
    digest: [u8; 32],
    cipher_len: usize,
}

impl MessageEnvelope {
    fn coords(&self) -> usize {
        match &self.payload {
            Payload::Encrypted(c) => c.len(),
            Payload::Simulated(w) => w.len(),
        }
    }

    /// Wire size: routing header, one ciphertext-sized block per coordinate
    /// (simulated payloads are costed as if encrypted), and the digest.
    pub fn byte_len(&self) -> usize {
        28 + self.coords() * self.cipher_len + 32
    }

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(28 + self.coords() * self.cipher_len);
        bytes.extend_from_slice(&(self.sender_client as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.receiver_client as u64).to_le_bytes());
        bytes.extend_from_slice(&self.receiver_jurisdiction.to_le_bytes());
        bytes.extend_from_slice(&(self.layer as u64).to_le_bytes());
        match &self.payload {
            Payload::Encrypted(cts) => {
                for ct in cts {
                    let mut block = ct.0.to_bytes_le();
                    block.resize(self.cipher_len, 0);
                    bytes.extend_from_slice(&block);
                }
            }
            Payload::Simulated(words) => {
                for w in words {
                    bytes.extend_from_slice(&w.to_le_bytes());
                }
            }
        }
        bytes
    }

    fn seal(mut self) -> Self {
        let digest = Sha256::digest(self.canonical_bytes());
        self.digest.copy_from_slice(&digest);
        self
    }
}

/// Quantize and package one layer's message for the receiving jurisdiction.
#[allow(clippy::too_many_arguments)]
pub fn seal_boundary_message(
    message: &[f64],
    sender_client: usize,
    receiver_client: usize,
    receiver_jurisdiction: u32,
    layer: usize,
    mode: CryptoMode,
    directory: &KeyDirectory,
    rng: &mut ChaCha12Rng,
) -> Result<MessageEnvelope> {
    let words = message
        .iter()
        .map(|&v| encode_fixed(v))
        .collect::<Result<Vec<u64>>>()?;
    let payload = match mode {
        CryptoMode::Simulated => Payload::Simulated(words),
        CryptoMode::Paillier => {
            let keypair = directory.keypair(receiver_jurisdiction)?;
            if keypair.public.n.bits() <= 64 {
                return Err(Error::PrivacyParam(format!(
                    "{}-bit modulus cannot hold a 64-bit fixed-point word",
                    keypair.public.n.bits()
                )));
            }
            let cts = words
                .iter()
                .map(|&w| keypair.public.encrypt(&BigUint::from(w), rng))
                .collect::<Result<Vec<_>>>()?;
            Payload::Encrypted(cts)
        }
    };
    Ok(MessageEnvelope {
        sender_client,
        receiver_client,
        receiver_jurisdiction,
        layer,
        payload,
        digest: [0; 32],
        cipher_len: directory.cipher_len(),
    }
    .seal())
}

/// Verify and decode an envelope at the receiving side.
pub fn open_boundary_message(
    envelope: &MessageEnvelope,
    directory: &KeyDirectory,
) -> Result<Vec<f64>> {
    let digest = Sha256::digest(envelope.canonical_bytes());
    if digest.as_slice() != envelope.digest {
        return Err(Error::Integrity(format!(
            "envelope digest mismatch on message from client {} to client {}",
            envelope.sender_client, envelope.receiver_client
        )));
    }
    match &envelope.payload {
        Payload::Simulated(words) => Ok(words.iter().map(|&w| decode_fixed(w)).collect()),
        Payload::Encrypted(cts) => {
            let keypair = directory.keypair(envelope.receiver_jurisdiction)?;
            cts.iter()
                .map(|ct| {
                    let m = keypair.decrypt(ct)?;
                    let word = m.to_u64().ok_or_else(|| {
                        Error::Integrity("decrypted word exceeds 64 bits".into())
                    })?;
                    Ok(decode_fixed(word))
                })
                .collect()
        }
    }
}

/// One full boundary exchange for a single (edge, layer): seal the
/// sender-side message for the receiving jurisdiction and open it there,
/// returning the receiver's decoded view plus the wire envelope for byte
/// accounting.
#[allow(clippy::too_many_arguments)]
pub fn exchange_boundary_message(
    message: &[f64],
    sender_client: usize,
    receiver_client: usize,
    receiver_jurisdiction: u32,
    layer: usize,
    mode: CryptoMode,
    directory: &KeyDirectory,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<f64>, MessageEnvelope)> {
    let envelope = seal_boundary_message(
        message,
        sender_client,
        receiver_client,
        receiver_jurisdiction,
        layer,
        mode,
        directory,
        rng,
    )?;
    let decoded = open_boundary_message(&envelope, directory)?;
    Ok((decoded, envelope))
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUANTUM: f64 = 1.0 / 65536.0;

    fn paillier_directory() -> KeyDirectory {
        KeyDirectory::generate(&[0, 1], 128, 99).unwrap()
    }

    fn exchange(
        message: &[f64],
        mode: CryptoMode,
        directory: &KeyDirectory,
    ) -> Result<(Vec<f64>, MessageEnvelope)> {
        let mut rng = derive_rng(1, "exchange-test", &[]);
        exchange_boundary_message(message, 0, 1, 1, 0, mode, directory, &mut rng)
    }

    #[test]
    fn identity_map_roundtrips_within_a_quantum() {
        // W = identity, h = (1, 2): message is (1, 2) itself.
        let dir = paillier_directory();
        let (decoded, _) = exchange(&[1.0, 2.0], CryptoMode::Paillier, &dir).unwrap();
        assert!((decoded[0] - 1.0).abs() <= QUANTUM);
        assert!((decoded[1] - 2.0).abs() <= QUANTUM);
    }

    #[test]
    fn zero_vector_decodes_to_exact_zero() {
        let dir = paillier_directory();
        let (decoded, _) = exchange(&[0.0, 0.0, 0.0], CryptoMode::Paillier, &dir).unwrap();
        assert_eq!(decoded, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn random_linear_message_matches_plaintext_oracle() {
        // W·h computed by explicit loops; the exchange must deliver it up to
        // quantization.
        let w = [[0.5, -1.25, 2.0], [0.125, 0.75, -0.5]];
        let h = [1.5, -2.0, 0.25];
        let message: Vec<f64> = w
            .iter()
            .map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum())
            .collect();
        let dir = paillier_directory();
        let (decoded, _) = exchange(&message, CryptoMode::Paillier, &dir).unwrap();
        for (d, m) in decoded.iter().zip(&message) {
            assert!((d - m).abs() <= QUANTUM, "{d} vs {m}");
        }
    }

    #[test]
    fn simulated_and_encrypted_paths_decode_identically() {
        let message = [0.123456, -9.87, 42.0, -0.0001];
        let dir = paillier_directory();
        let (real, real_env) = exchange(&message, CryptoMode::Paillier, &dir).unwrap();
        let (sim, sim_env) = exchange(&message, CryptoMode::Simulated, &dir).unwrap();
        assert_eq!(real, sim);
        assert_eq!(real_env.byte_len(), sim_env.byte_len());
    }

    #[test]
    fn tampered_payload_fails_the_integrity_check() {
        let dir = paillier_directory();
        let (_, mut env) = exchange(&[1.0, -1.0], CryptoMode::Paillier, &dir).unwrap();
        match &mut env.payload {
            Payload::Encrypted(cts) => cts[0].0 += 1u32,
            Payload::Simulated(_) => unreachable!(),
        }
        assert!(matches!(
            open_boundary_message(&env, &dir),
            Err(Error::Integrity(_))
        ));

        let (_, mut sim_env) = exchange(&[1.0, -1.0], CryptoMode::Simulated, &dir).unwrap();
        match &mut sim_env.payload {
            Payload::Simulated(words) => words[0] ^= 1,
            Payload::Encrypted(_) => unreachable!(),
        }
        assert!(matches!(
            open_boundary_message(&sim_env, &dir),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn missing_jurisdiction_key_is_reported() {
        let dir = KeyDirectory::generate(&[0], 128, 5).unwrap();
        let mut rng = derive_rng(2, "exchange-test", &[]);
        let err = seal_boundary_message(
            &[1.0],
            0,
            1,
            7,
            0,
            CryptoMode::Paillier,
            &dir,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::MissingKey(7))));
    }

    #[test]
    fn undersized_modulus_is_rejected_for_encryption() {
        let dir = KeyDirectory::generate(&[1], 64, 5).unwrap();
        let mut rng = derive_rng(3, "exchange-test", &[]);
        let err = seal_boundary_message(
            &[1.0],
            0,
            1,
            1,
            0,
            CryptoMode::Paillier,
            &dir,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::PrivacyParam(_))));
    }

    #[test]
    fn encrypted_envelopes_carry_only_ciphertexts() {
        // The envelope type admits no plaintext floats; under real crypto
        // the payload is group elements only.
        let dir = paillier_directory();
        let (_, env) = exchange(&[3.25, -1.5], CryptoMode::Paillier, &dir).unwrap();
        match &env.payload {
            Payload::Encrypted(cts) => {
                assert_eq!(cts.len(), 2);
                let keypair = dir.keypair(1).unwrap();
                for ct in cts {
                    // Each entry is a nontrivial element of ℤ_{n²}, not a
                    // fixed-point word in disguise.
                    assert!(ct.0 > BigUint::from(u64::MAX));
                    assert!(ct.0 < keypair.public.n_squared);
                }
            }
            Payload::Simulated(_) => panic!("expected encrypted payload"),
        }
    }

    #[test]
    fn byte_length_is_header_plus_blocks_plus_digest() {
        let dir = paillier_directory();
        assert_eq!(dir.cipher_len(), 32);
        let (_, env) = exchange(&[1.0, 2.0, 3.0], CryptoMode::Paillier, &dir).unwrap();
        assert_eq!(env.byte_len(), 28 + 3 * 32 + 32);
    }
}
