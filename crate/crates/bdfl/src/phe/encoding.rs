//! Fixed-point encoding of signed reals into the plaintext ring.

use super::keys::PublicKey;
use super::{big_to_f64, ldexp};
use crate::error::CryptoError;
use num_bigint::BigUint;
use num_traits::Zero;

/// A real carried as `mantissa * 2^exponent` with the mantissa reduced into
/// `[0, n)`. Mantissas above `n/2` represent negative values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedNumber {
    pub(crate) mantissa: BigUint,
    pub(crate) exponent: i32,
}

impl EncodedNumber {
    pub fn mantissa(&self) -> &BigUint {
        &self.mantissa
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    pub fn is_negative(&self, pk: &PublicKey) -> bool {
        &self.mantissa > pk.half_n()
    }

    /// Magnitude of the mantissa (distance from zero in the signed reading).
    pub(crate) fn abs_mantissa(&self, pk: &PublicKey) -> BigUint {
        if self.is_negative(pk) {
            pk.n() - &self.mantissa
        } else {
            self.mantissa.clone()
        }
    }

    /// Bit length of the signed magnitude; tracked through homomorphic
    /// operations to detect potential wrap-around before it happens.
    pub(crate) fn mag_bits(&self, pk: &PublicKey) -> u64 {
        self.abs_mantissa(pk).bits()
    }

    /// Re-expresses this number at a smaller exponent without changing its
    /// value: the mantissa is shifted left by the exponent difference.
    pub fn align_to(&self, pk: &PublicKey, exponent: i32) -> Result<EncodedNumber, CryptoError> {
        if exponent > self.exponent {
            return Err(CryptoError::ExponentMismatch(self.exponent, exponent));
        }
        let shift = (self.exponent - exponent) as u64;
        let mantissa = (&self.mantissa << shift) % pk.n();
        Ok(EncodedNumber { mantissa, exponent })
    }

    /// Adds two encoded numbers after aligning to the smaller exponent.
    pub fn add(&self, pk: &PublicKey, other: &EncodedNumber) -> Result<EncodedNumber, CryptoError> {
        let exponent = self.exponent.min(other.exponent);
        let a = self.align_to(pk, exponent)?;
        let b = other.align_to(pk, exponent)?;
        let mantissa = (a.mantissa + b.mantissa) % pk.n();
        Ok(EncodedNumber { mantissa, exponent })
    }

    pub(crate) fn from_parts(mantissa: BigUint, exponent: i32) -> Self {
        EncodedNumber { mantissa, exponent }
    }
}

/// Encodes `x` as `round(x * 2^scale_bits)` at exponent `-scale_bits`.
///
/// Fails when the magnitude would exceed a third of the ring, which is the
/// headroom reserved for homomorphic accumulation on top of single values.
pub fn encode(pk: &PublicKey, x: f64, scale_bits: u32) -> Result<EncodedNumber, CryptoError> {
    if !x.is_finite() {
        return Err(CryptoError::NonFinite(x));
    }
    let abs = scaled_abs_mantissa(x, scale_bits);
    if &abs > pk.max_int() {
        return Err(CryptoError::EncodingOverflow { value: x, scale_bits });
    }
    let mantissa = if x.is_sign_negative() && !abs.is_zero() { pk.n() - &abs } else { abs };
    Ok(EncodedNumber { mantissa, exponent: -(scale_bits as i32) })
}

/// Inverse of [`encode`] up to one quantum of `2^exponent`.
pub fn decode(pk: &PublicKey, e: &EncodedNumber) -> f64 {
    let (abs, neg) = if e.is_negative(pk) {
        (pk.n() - &e.mantissa, true)
    } else {
        (e.mantissa.clone(), false)
    };
    let v = ldexp(big_to_f64(&abs), e.exponent);
    if neg {
        -v
    } else {
        v
    }
}

/// `round(|x| * 2^scale_bits)` computed exactly from the bit pattern of `x`
/// (ties round away from zero).
fn scaled_abs_mantissa(x: f64, scale_bits: u32) -> BigUint {
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & 0x000f_ffff_ffff_ffff;
    let (m, e2) = if raw_exp == 0 {
        (frac, -1074i64) // subnormal (covers zero)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let shift = e2 + scale_bits as i64;
    if shift >= 0 {
        BigUint::from(m) << shift as u64
    } else {
        let k = (-shift) as u32;
        if k > 64 || m == 0 {
            return BigUint::zero();
        }
        let kept = if k == 64 { 0 } else { m >> k };
        let round_bit = (m >> (k - 1)) & 1;
        BigUint::from(kept + round_bit)
    }
}
