//! Key generation and serialization.

use super::{big_to_f64, mod_inverse};
use crate::error::CryptoError;
use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Key sizes accepted by [`generate_keypair`].
pub const SUPPORTED_KEY_BITS: [u32; 4] = [512, 1024, 2048, 3072];

const MILLER_RABIN_ROUNDS: usize = 30;

/// Public half of a Paillier keypair. `g` is fixed to `n + 1`, which makes
/// `g^m = 1 + n*m (mod n^2)` a single multiplication.
#[derive(Debug, Clone)]
pub struct PublicKey {
    n: BigUint,
    g: BigUint,
    nn: BigUint,
    key_bits: u32,
    max_int: BigUint,
    half_n: BigUint,
    log2_half_n: f64,
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.key_bits == other.key_bits
    }
}

impl Eq for PublicKey {}

impl PublicKey {
    pub(crate) fn from_n(n: BigUint, key_bits: u32) -> Self {
        let g = &n + BigUint::one();
        let nn = &n * &n;
        let max_int = &n / BigUint::from(3u8);
        let half_n = &n >> 1;
        let log2_half_n = super::log2_big(&n) - 1.0;
        PublicKey { n, g, nn, key_bits, max_int, half_n, log2_half_n }
    }

    /// `log2(n/2)`: the magnitude ceiling for decodable accumulations.
    pub(crate) fn log2_half_n(&self) -> f64 {
        self.log2_half_n
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub(crate) fn nn(&self) -> &BigUint {
        &self.nn
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    /// Largest mantissa magnitude a single encode may carry; one third of
    /// the ring, reserving headroom for homomorphic accumulation.
    pub(crate) fn max_int(&self) -> &BigUint {
        &self.max_int
    }

    /// Mantissas above this bound decode as negative values.
    pub(crate) fn half_n(&self) -> &BigUint {
        &self.half_n
    }
}

/// Private half of a Paillier keypair: `lambda = phi(n)` and
/// `mu = phi(n)^-1 mod n` (valid because `g = n + 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    lambda: BigUint,
    mu: BigUint,
}

impl PrivateKey {
    pub(crate) fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub(crate) fn mu(&self) -> &BigUint {
        &self.mu
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

/// Generates a keypair deterministically from `seed`.
///
/// The same `(key_bits, seed)` always produces the same keys, which is what
/// makes full protocol runs replayable.
pub fn generate_keypair(key_bits: u32, seed: u64) -> Result<KeyPair, CryptoError> {
    if !SUPPORTED_KEY_BITS.contains(&key_bits) {
        return Err(CryptoError::UnsupportedKeyBits(key_bits));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x6b65_7967_656e_0001);
    let half = (key_bits / 2) as u64;
    loop {
        let p = gen_prime(half, &mut rng);
        let q = gen_prime(half, &mut rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() != key_bits as u64 {
            continue;
        }
        let lambda = (&p - BigUint::one()) * (&q - BigUint::one());
        let mu = match mod_inverse(&lambda, &n) {
            Some(mu) => mu,
            None => continue,
        };
        let public = PublicKey::from_n(n, key_bits);
        return Ok(KeyPair { public, private: PrivateKey { lambda, mu } });
    }
}

fn gen_prime(bits: u64, rng: &mut ChaCha20Rng) -> BigUint {
    loop {
        let mut cand = rng.gen_biguint(bits);
        // Top two bits set so p*q reaches the full key width; low bit for oddness.
        cand.set_bit(bits - 1, true);
        cand.set_bit(bits - 2, true);
        cand.set_bit(0, true);
        if is_prime(&cand, rng) {
            return cand;
        }
    }
}

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Miller-Rabin with random witnesses drawn from the caller's RNG.
fn is_prime(cand: &BigUint, rng: &mut ChaCha20Rng) -> bool {
    for &sp in SMALL_PRIMES.iter() {
        let sp = BigUint::from(sp);
        if cand == &sp {
            return true;
        }
        if (cand % &sp).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let two = BigUint::from(2u8);
    let cand_minus_one = cand - &one;
    // cand - 1 = d * 2^s with d odd
    let s = cand_minus_one.trailing_zeros().unwrap_or(0);
    let d = &cand_minus_one >> s;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &cand_minus_one);
        let mut x = a.modpow(&d, cand);
        if x.is_one() || x == cand_minus_one {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, cand);
            if x == cand_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// --- serialization -----------------------------------------------------

/// Parses a big integer from a decimal string or a `0x`-prefixed hex string.
pub(crate) fn parse_big(s: &str) -> Result<BigUint, CryptoError> {
    let parsed = if let Some(hexpart) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        BigUint::parse_bytes(hexpart.as_bytes(), 16)
    } else {
        BigUint::parse_bytes(s.as_bytes(), 10)
    };
    parsed.ok_or_else(|| CryptoError::BadBigIntLiteral(s.to_string()))
}

#[derive(Serialize, Deserialize)]
struct PublicKeyDoc {
    n: String,
    g: String,
    key_bits: u32,
}

#[derive(Serialize, Deserialize)]
struct PrivateKeyDoc {
    lambda: String,
    mu: String,
}

impl Serialize for PublicKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PublicKeyDoc {
            n: self.n.to_string(),
            g: self.g.to_string(),
            key_bits: self.key_bits,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = PublicKeyDoc::deserialize(deserializer)?;
        let n = parse_big(&doc.n).map_err(serde::de::Error::custom)?;
        let g = parse_big(&doc.g).map_err(serde::de::Error::custom)?;
        let pk = PublicKey::from_n(n, doc.key_bits);
        if pk.g != g {
            return Err(serde::de::Error::custom("public key g must equal n + 1"));
        }
        if pk.n.bits() != doc.key_bits as u64 || pk.n.bits() < 16 {
            return Err(serde::de::Error::custom("key_bits does not match modulus width"));
        }
        Ok(pk)
    }
}

impl Serialize for PrivateKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PrivateKeyDoc { lambda: self.lambda.to_string(), mu: self.mu.to_string() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PrivateKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = PrivateKeyDoc::deserialize(deserializer)?;
        let lambda = parse_big(&doc.lambda).map_err(serde::de::Error::custom)?;
        let mu = parse_big(&doc.mu).map_err(serde::de::Error::custom)?;
        Ok(PrivateKey { lambda, mu })
    }
}

impl PublicKey {
    /// Rough magnitude of the modulus as a float; used for diagnostics only.
    pub fn n_approx(&self) -> f64 {
        big_to_f64(&self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keygen_is_deterministic() {
        let a = generate_keypair(512, 7).unwrap();
        let b = generate_keypair(512, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_keypair(512, 8).unwrap();
        assert_ne!(a.public.n(), c.public.n());
    }

    #[test]
    fn keygen_rejects_unsupported_sizes() {
        assert!(matches!(generate_keypair(100, 1), Err(CryptoError::UnsupportedKeyBits(100))));
        assert!(matches!(generate_keypair(4096, 1), Err(CryptoError::UnsupportedKeyBits(4096))));
    }

    #[test]
    fn modulus_has_requested_width() {
        let kp = generate_keypair(512, 3).unwrap();
        assert_eq!(kp.public.n().bits(), 512);
        assert_eq!(kp.public.key_bits(), 512);
    }

    #[test]
    fn public_key_json_round_trip() {
        let kp = generate_keypair(512, 11).unwrap();
        let json = serde_json::to_string(&kp.public).unwrap();
        assert!(json.contains("\"key_bits\":512"));
        let back: PublicKey = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kp.public);

        let json = serde_json::to_string(&kp.private).unwrap();
        let back: PrivateKey = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kp.private);
    }

    #[test]
    fn parse_big_accepts_hex_and_decimal() {
        assert_eq!(parse_big("255").unwrap(), BigUint::from(255u8));
        assert_eq!(parse_big("0xff").unwrap(), BigUint::from(255u8));
        assert!(parse_big("zz").is_err());
    }

    #[test]
    fn miller_rabin_agrees_with_small_primes() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let primes: Vec<u32> = (2u32..300).filter(|&m| (2..m).all(|d| m % d != 0)).collect();
        for m in 2u32..300 {
            let got = is_prime(&BigUint::from(m), &mut rng);
            assert_eq!(got, primes.contains(&m), "mismatch at {m}");
        }
    }
}
