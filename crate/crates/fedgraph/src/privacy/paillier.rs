//! Toy Paillier cryptosystem with the g = n + 1 simplification, used for
//! additively homomorphic aggregation across jurisdiction boundaries.
//!
//! Key sizes here are far below anything deployable; the point is to make
//! ciphertext-space addition real inside the simulator, not to resist a
//! motivated attacker.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MILLER_RABIN_ROUNDS: u32 = 64;
/// Smallest accepted modulus size; anything below this is nonsense even
/// for a demo.
pub const MIN_KEY_BITS: u64 = 64;
/// Default modulus size for generated keys.
pub const DEFAULT_KEY_BITS: u64 = 512;

/// Public half of a key: the modulus n and cached n².
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaillierPublic {
    pub n: BigUint,
    pub n_squared: BigUint,
}

/// Full keypair; λ and μ stay private to the owning jurisdiction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierKeyPair {
    pub public: PaillierPublic,
    lambda: BigUint,
    mu: BigUint,
}

/// A Paillier ciphertext: an element of ℤ*_{n²}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext(pub BigUint);

impl PaillierPublic {
    /// Encrypt m ∈ [0, n) with a fresh random blinding factor, so repeated
    /// encryptions of the same message differ.
    pub fn encrypt(&self, m: &BigUint, rng: &mut ChaCha12Rng) -> Result<Ciphertext> {
        if m >= &self.n {
            return Err(Error::PrivacyParam(format!(
                "message {m} outside [0, n) for modulus of {} bits",
                self.n.bits()
            )));
        }
        let r = loop {
            let candidate = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if candidate.gcd(&self.n).is_one() {
                break candidate;
            }
        };
        // With g = n + 1, g^m mod n² collapses to 1 + m·n.
        let g_m = (BigUint::one() + m * &self.n) % &self.n_squared;
        let r_n = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext((g_m * r_n) % &self.n_squared))
    }

    /// Homomorphic addition: multiplying ciphertexts adds plaintexts mod n.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        Ciphertext((&a.0 * &b.0) % &self.n_squared)
    }
}

impl PaillierKeyPair {
    /// Generate a keypair with a modulus of roughly `bits` bits.
    pub fn generate(bits: u64, rng: &mut ChaCha12Rng) -> Result<Self> {
        if bits < MIN_KEY_BITS {
            return Err(Error::PrivacyParam(format!(
                "key size {bits} below the {MIN_KEY_BITS}-bit minimum"
            )));
        }
        let half = bits / 2;
        loop {
            let p = random_prime(half, rng);
            let q = random_prime(bits - half, rng);
            if p == q {
                continue;
            }
            if let Some(keypair) = Self::from_parts(p, q) {
                return Ok(keypair);
            }
        }
    }

    /// Build a keypair from two explicit primes — tiny keys for worked
    /// examples and tests.
    pub fn from_primes(p: u64, q: u64) -> Result<Self> {
        if !is_small_prime(p) || !is_small_prime(q) {
            return Err(Error::PrivacyParam(format!(
                "{p} and {q} must both be prime"
            )));
        }
        if p == q {
            return Err(Error::PrivacyParam("primes must be distinct".into()));
        }
        Self::from_parts(BigUint::from(p), BigUint::from(q)).ok_or_else(|| {
            Error::PrivacyParam(format!("lcm(p-1, q-1) shares a factor with n for ({p}, {q})"))
        })
    }

    fn from_parts(p: BigUint, q: BigUint) -> Option<Self> {
        let n = &p * &q;
        let n_squared = &n * &n;
        let lambda = (&p - 1u32).lcm(&(&q - 1u32));
        // μ = λ⁻¹ mod n exists iff gcd(λ, n) = 1.
        let mu = mod_inverse(&lambda, &n)?;
        Some(Self {
            public: PaillierPublic { n, n_squared },
            lambda,
            mu,
        })
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        let n = &self.public.n;
        let n_squared = &self.public.n_squared;
        if c.0.is_zero() || &c.0 >= n_squared {
            return Err(Error::Integrity(format!(
                "ciphertext outside the group for a {}-bit modulus",
                n.bits()
            )));
        }
        let x = c.0.modpow(&self.lambda, n_squared);
        // L(x) = (x - 1) / n; x ≡ 1 (mod n) for valid ciphertexts.
        let l = (&x - 1u32) / n;
        Ok((l * &self.mu) % n)
    }
}

/// Modular inverse via the extended Euclidean algorithm.
fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone());
    let m = BigInt::from(modulus.clone());
    let egcd = a.extended_gcd(&m);
    if !egcd.gcd.is_one() {
        return None;
    }
    let mut x = egcd.x % &m;
    if x.is_negative() {
        x += &m;
    }
    x.to_biguint()
}

/// Uniform random prime with exactly `bits` bits (top and bottom bit set).
fn random_prime(bits: u64, rng: &mut ChaCha12Rng) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return candidate;
        }
    }
}

/// Miller–Rabin with `rounds` random bases.
fn is_probable_prime(n: &BigUint, rounds: u32, rng: &mut ChaCha12Rng) -> bool {
    let two = BigUint::from(2u32);
    let three = BigUint::from(3u32);
    if n < &two {
        return false;
    }
    if n == &two || n == &three {
        return true;
    }
    if n.is_even() {
        return false;
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Exact primality for u64 inputs via trial division; plenty for the tiny
/// worked-example keys.
fn is_small_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn worked_example_five_seven() {
        let keys = PaillierKeyPair::from_primes(5, 7).unwrap();
        assert_eq!(keys.public.n, BigUint::from(35u32));
        let mut rng = derive_rng(1, "paillier", &[]);
        let c2 = keys.public.encrypt(&BigUint::from(2u32), &mut rng).unwrap();
        let c3 = keys.public.encrypt(&BigUint::from(3u32), &mut rng).unwrap();
        let sum = keys.public.add(&c2, &c3);
        assert_eq!(keys.decrypt(&sum).unwrap(), BigUint::from(5u32));
    }

    #[test]
    fn decrypt_inverts_encrypt() {
        let mut rng = derive_rng(2, "paillier", &[]);
        let keys = PaillierKeyPair::generate(128, &mut rng).unwrap();
        for t in 0..50u64 {
            let m = rng.gen_biguint_range(&BigUint::zero(), &keys.public.n);
            let c = keys.public.encrypt(&m, &mut rng).unwrap();
            assert_eq!(keys.decrypt(&c).unwrap(), m, "trial {t}");
        }
    }

    #[test]
    fn encryption_is_randomized() {
        let mut rng = derive_rng(3, "paillier", &[]);
        let keys = PaillierKeyPair::generate(128, &mut rng).unwrap();
        let m = BigUint::from(42u32);
        let a = keys.public.encrypt(&m, &mut rng).unwrap();
        let b = keys.public.encrypt(&m, &mut rng).unwrap();
        assert_ne!(a, b);
        assert_eq!(keys.decrypt(&a).unwrap(), m);
        assert_eq!(keys.decrypt(&b).unwrap(), m);
    }

    #[test]
    fn homomorphic_addition_thousand_random_pairs() {
        let mut rng = derive_rng(4, "paillier", &[]);
        let keys = PaillierKeyPair::generate(512, &mut rng).unwrap();
        assert!(keys.public.n.bits() >= 511);
        let half = &keys.public.n >> 1;
        for t in 0..1000u64 {
            let m1 = rng.gen_biguint_range(&BigUint::zero(), &half);
            let m2 = rng.gen_biguint_range(&BigUint::zero(), &half);
            let c1 = keys.public.encrypt(&m1, &mut rng).unwrap();
            let c2 = keys.public.encrypt(&m2, &mut rng).unwrap();
            let sum = keys.public.add(&c1, &c2);
            assert_eq!(keys.decrypt(&sum).unwrap(), &m1 + &m2, "pair {t}");
        }
    }

    #[test]
    fn addition_commutes_and_associates_under_decryption() {
        let keys = PaillierKeyPair::from_primes(11, 13).unwrap();
        let mut rng = derive_rng(5, "paillier", &[]);
        let enc = |m: u32, rng: &mut _| keys.public.encrypt(&BigUint::from(m), rng).unwrap();
        let (a, b, c) = (enc(20, &mut rng), enc(31, &mut rng), enc(45, &mut rng));
        let ab = keys.public.add(&a, &b);
        let ba = keys.public.add(&b, &a);
        assert_eq!(keys.decrypt(&ab).unwrap(), keys.decrypt(&ba).unwrap());
        let left = keys.public.add(&ab, &c);
        let right = keys.public.add(&a, &keys.public.add(&b, &c));
        assert_eq!(keys.decrypt(&left).unwrap(), BigUint::from(96u32));
        assert_eq!(keys.decrypt(&left).unwrap(), keys.decrypt(&right).unwrap());
    }

    #[test]
    fn message_out_of_range_is_rejected() {
        let keys = PaillierKeyPair::from_primes(5, 7).unwrap();
        let mut rng = derive_rng(6, "paillier", &[]);
        let err = keys.public.encrypt(&BigUint::from(35u32), &mut rng);
        assert!(matches!(err, Err(Error::PrivacyParam(_))));
    }

    #[test]
    fn ciphertext_outside_group_is_rejected() {
        let keys = PaillierKeyPair::from_primes(5, 7).unwrap();
        assert!(matches!(
            keys.decrypt(&Ciphertext(BigUint::zero())),
            Err(Error::Integrity(_))
        ));
        assert!(matches!(
            keys.decrypt(&Ciphertext(keys.public.n_squared.clone())),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn tiny_or_invalid_key_requests_error() {
        let mut rng = derive_rng(7, "paillier", &[]);
        assert!(matches!(
            PaillierKeyPair::generate(32, &mut rng),
            Err(Error::PrivacyParam(_))
        ));
        assert!(PaillierKeyPair::from_primes(4, 7).is_err());
        assert!(PaillierKeyPair::from_primes(5, 5).is_err());
    }

    #[test]
    fn keygen_is_deterministic_for_a_seed() {
        let a = PaillierKeyPair::generate(64, &mut derive_rng(8, "paillier", &[])).unwrap();
        let b = PaillierKeyPair::generate(64, &mut derive_rng(8, "paillier", &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_prime_checker_agrees_with_trial_division() {
        let primes = [2u64, 3, 5, 7, 11, 13, 97, 7919];
        let composites = [0u64, 1, 4, 9, 15, 91, 7917];
        for p in primes {
            assert!(is_small_prime(p), "{p}");
        }
        for c in composites {
            assert!(!is_small_prime(c), "{c}");
        }
    }
}
