//! Ciphertexts and the homomorphic operations the protocol relies on.

use super::encoding::EncodedNumber;
use super::keys::{parse_big, KeyPair, PublicKey};
use super::{gcd_is_one, mod_inverse};
use crate::error::CryptoError;
use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of precomputed obfuscators kept per encryptor.
const OBFUSCATOR_POOL: usize = 16;

/// A Paillier ciphertext together with the fixed-point exponent of the
/// plaintext it carries.
///
/// `mag_log2` is a plaintext-side upper bound on `log2` of the carried
/// mantissa magnitude, maintained through homomorphic operations so
/// accumulation that could wrap the ring is rejected up front. Ciphertexts
/// parsed from the wire have no bound and skip the check. Equality compares
/// the ciphertext value and exponent only.
#[derive(Debug, Clone)]
pub struct Ciphertext {
    value: BigUint,
    exponent: i32,
    mag_log2: Option<f64>,
}

impl PartialEq for Ciphertext {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.exponent == other.exponent
    }
}

impl Eq for Ciphertext {}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    /// Re-expresses the ciphertext at a smaller exponent by multiplying the
    /// plaintext mantissa by the power-of-two difference.
    pub fn rescale_to(&self, pk: &PublicKey, exponent: i32) -> Result<Ciphertext, CryptoError> {
        if exponent > self.exponent {
            return Err(CryptoError::ExponentMismatch(self.exponent, exponent));
        }
        let diff = (self.exponent - exponent) as u64;
        if diff == 0 {
            return Ok(self.clone());
        }
        let two_pow = BigUint::one() << diff;
        let value = self.value.modpow(&two_pow, pk.nn());
        Ok(Ciphertext {
            value,
            exponent,
            mag_log2: self.mag_log2.map(|b| b + diff as f64),
        })
    }

    fn check_key(&self, pk: &PublicKey) -> Result<(), CryptoError> {
        if &self.value >= pk.nn() {
            return Err(CryptoError::KeyMismatch);
        }
        Ok(())
    }
}

/// Seeded source of encryption randomness with a pool of obfuscators.
///
/// A fresh obfuscation `r^n mod n^2` costs a full-width exponentiation, so
/// the pool is seeded with a handful of fresh values and then evolved by a
/// random product walk; every draw still comes from the owner's seeded RNG,
/// so runs replay byte-identically.
pub struct EncryptionRng {
    rng: ChaCha20Rng,
    pool: Vec<BigUint>,
}

impl EncryptionRng {
    pub fn new(rng: ChaCha20Rng) -> Self {
        EncryptionRng { rng, pool: Vec::with_capacity(OBFUSCATOR_POOL) }
    }

    fn obfuscator(&mut self, pk: &PublicKey) -> BigUint {
        if self.pool.len() < OBFUSCATOR_POOL {
            let r = loop {
                let r = self.rng.gen_biguint_range(&BigUint::one(), pk.n());
                if gcd_is_one(&r, pk.n()) {
                    break r;
                }
            };
            let obf = r.modpow(pk.n(), pk.nn());
            self.pool.push(obf.clone());
            return obf;
        }
        let i = (self.rng.next_u64() as usize) % self.pool.len();
        let j = (self.rng.next_u64() as usize) % self.pool.len();
        let prod = (&self.pool[i] * &self.pool[j]) % pk.nn();
        self.pool[i] = prod.clone();
        prod
    }
}

use rand::RngCore;

/// Encrypts an encoded number: `c = (1 + n*m) * r^n mod n^2`.
pub fn encrypt(pk: &PublicKey, e: &EncodedNumber, rng: &mut EncryptionRng) -> Ciphertext {
    let raw = (BigUint::one() + pk.n() * e.mantissa()) % pk.nn();
    let value = (raw * rng.obfuscator(pk)) % pk.nn();
    Ciphertext { value, exponent: e.exponent(), mag_log2: Some(e.mag_log2(pk)) }
}

/// Decrypts a ciphertext back to its encoded number.
///
/// Rejects values outside `[0, n^2)` and values sharing a factor with the
/// modulus.
pub fn decrypt(kp: &KeyPair, c: &Ciphertext) -> Result<EncodedNumber, CryptoError> {
    let pk = &kp.public;
    if &c.value >= pk.nn() || !gcd_is_one(&c.value, pk.n()) {
        return Err(CryptoError::MalformedCiphertext);
    }
    let x = c.value.modpow(kp.private.lambda(), pk.nn());
    // L(x) = (x - 1) / n
    let l = (x - BigUint::one()) / pk.n();
    let mantissa = (l * kp.private.mu()) % pk.n();
    Ok(EncodedNumber::from_parts(mantissa, c.exponent))
}

/// Homomorphic addition. Operands at different exponents are aligned by
/// rescaling the one with the larger exponent.
pub fn ct_add(pk: &PublicKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, CryptoError> {
    a.check_key(pk)?;
    b.check_key(pk)?;
    let exponent = a.exponent.min(b.exponent);
    let a = a.rescale_to(pk, exponent)?;
    let b = b.rescale_to(pk, exponent)?;
    let mag_log2 = match (a.mag_log2, b.mag_log2) {
        (Some(x), Some(y)) => {
            // log2(2^x + 2^y), exact form of the triangle inequality
            let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
            let bound = if lo == f64::NEG_INFINITY {
                hi
            } else {
                hi + (1.0 + 2f64.powf(lo - hi)).log2()
            };
            if bound >= pk.log2_half_n() {
                return Err(CryptoError::HeadroomExceeded);
            }
            Some(bound)
        }
        _ => None,
    };
    let value = (&a.value * &b.value) % pk.nn();
    Ok(Ciphertext { value, exponent, mag_log2 })
}

/// Homomorphic multiplication by an encoded plaintext scalar.
///
/// Negative scalars are applied through the inverse ciphertext so the
/// exponentiation stays at the scalar's magnitude rather than the ring width.
pub fn ct_scalar_mul(
    pk: &PublicKey,
    c: &Ciphertext,
    k: &EncodedNumber,
) -> Result<Ciphertext, CryptoError> {
    c.check_key(pk)?;
    let k_mag = k.mag_log2(pk);
    let mag_log2 = match c.mag_log2 {
        Some(b) => {
            let bound = b + k_mag;
            if bound >= pk.log2_half_n() {
                return Err(CryptoError::HeadroomExceeded);
            }
            Some(bound)
        }
        None => None,
    };
    let value = if k.is_negative(pk) {
        let abs = pk.n() - k.mantissa();
        let inv = mod_inverse(&c.value, pk.nn()).ok_or(CryptoError::MalformedCiphertext)?;
        inv.modpow(&abs, pk.nn())
    } else {
        c.value.modpow(k.mantissa(), pk.nn())
    };
    Ok(Ciphertext { value, exponent: c.exponent + k.exponent(), mag_log2 })
}

/// `sum_i cts[i] * weights[i]`, the bulk primitive behind encrypted gradient
/// accumulation. Scalar products are computed in parallel; the combination
/// is exact ring arithmetic, so the result does not depend on the degree of
/// parallelism.
pub fn ct_weighted_sum(
    pk: &PublicKey,
    cts: &[Ciphertext],
    weights: &[EncodedNumber],
) -> Result<Ciphertext, CryptoError> {
    assert_eq!(cts.len(), weights.len(), "weighted sum over mismatched lengths");
    assert!(!cts.is_empty(), "weighted sum over empty input");
    let products: Vec<Ciphertext> = cts
        .par_iter()
        .zip(weights.par_iter())
        .map(|(c, k)| ct_scalar_mul(pk, c, k))
        .collect::<Result<_, _>>()?;
    let mut acc = products[0].clone();
    for p in &products[1..] {
        acc = ct_add(pk, &acc, p)?;
    }
    Ok(acc)
}

// --- wire format --------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CiphertextWire {
    value: String,
    exponent: i32,
}

impl Serialize for Ciphertext {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CiphertextWire {
            value: hex::encode(self.value.to_bytes_be()),
            exponent: self.exponent,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Ciphertext {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = CiphertextWire::deserialize(deserializer)?;
        let stripped = wire.value.strip_prefix("0x").unwrap_or(&wire.value);
        let value = parse_big(&format!("0x{stripped}")).map_err(serde::de::Error::custom)?;
        Ok(Ciphertext { value, exponent: wire.exponent, mag_log2: None })
    }
}
