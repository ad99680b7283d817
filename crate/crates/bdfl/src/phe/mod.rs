//! Additively homomorphic Paillier cryptosystem with fixed-point encoding
//! of signed reals.
//!
//! The protocol only ever needs two identities: adding two ciphertexts adds
//! the underlying plaintexts, and raising a ciphertext to a plaintext power
//! multiplies the underlying plaintext by that scalar. Reals are carried as
//! `mantissa * 2^exponent` with the mantissa embedded in the plaintext ring
//! `Z_n` (upper half of the ring holds negative values).

mod ciphertext;
mod encoding;
mod keys;

pub use ciphertext::{ct_add, ct_scalar_mul, ct_weighted_sum, Ciphertext, EncryptionRng};
pub use encoding::{decode, encode, EncodedNumber};
pub use keys::{generate_keypair, KeyPair, PrivateKey, PublicKey, SUPPORTED_KEY_BITS};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Default fixed-point fractional precision in bits.
pub const DEFAULT_SCALE_BITS: u32 = 40;

/// Modular inverse of `a` mod `m`, if it exists.
pub(crate) fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone());
    let m = BigInt::from(m.clone());
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    let mut x = ext.x % &m;
    if x.is_negative() {
        x += &m;
    }
    x.to_biguint()
}

/// Multiplies `x` by `2^e` without overflowing the intermediate power.
pub(crate) fn ldexp(x: f64, e: i32) -> f64 {
    // powi(2, e) alone would overflow/underflow for |e| close to 1024 even
    // when the product itself is representable.
    let half = e / 2;
    x * 2f64.powi(half) * 2f64.powi(e - half)
}

/// Converts a non-negative big integer to `f64`, keeping the top 64 bits of
/// precision for values beyond the exact integer range.
pub(crate) fn big_to_f64(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 63 {
        return u64::try_from(v.clone()).map(|u| u as f64).unwrap_or(f64::INFINITY);
    }
    let shift = bits - 63;
    let top: BigUint = v >> shift;
    let top = u64::try_from(top).unwrap_or(u64::MAX);
    ldexp(top as f64, shift as i32)
}

pub(crate) fn gcd_is_one(a: &BigUint, b: &BigUint) -> bool {
    if a.is_zero() || b.is_zero() {
        return false;
    }
    a.gcd(b).is_one()
}

/// `log2` of a non-negative big integer, finite for any width.
pub(crate) fn log2_big(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 53 {
        return (u64::try_from(v.clone()).unwrap() as f64).log2();
    }
    let shift = bits - 53;
    let top = u64::try_from(v >> shift).unwrap() as f64;
    shift as f64 + top.log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_inverse_round_trip() {
        let m = BigUint::from(101u32);
        for a in 1u32..101 {
            let a = BigUint::from(a);
            let inv = mod_inverse(&a, &m).unwrap();
            assert_eq!((a * inv) % &m, BigUint::one());
        }
    }

    #[test]
    fn mod_inverse_rejects_non_coprime() {
        assert!(mod_inverse(&BigUint::from(6u32), &BigUint::from(9u32)).is_none());
    }

    #[test]
    fn big_to_f64_tracks_large_values() {
        let v = BigUint::from(1u8) << 200;
        let f = big_to_f64(&v);
        assert!((f / 2f64.powi(200) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ldexp_handles_extreme_exponents() {
        assert_eq!(ldexp(1.5, 3), 12.0);
        assert!(ldexp(1e300, -1200) > 0.0);
        assert!(ldexp(1e-300, 1200).is_finite());
    }
}
