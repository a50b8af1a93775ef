//! The crypto-provider interface and its default secp256k1 implementation.

use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::point::AffineCoordinates;
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::{Group, PrimeField};
use k256::{AffinePoint, EncodedPoint, ProjectivePoint, Scalar, U256};
use num_bigint::BigUint;

use super::{secp256k1_order, SignError};

/// Curve and digest operations the signature layer is built on.
///
/// Implementations must be stateless or internally synchronized; signing
/// takes the nonce explicitly and never draws randomness.
pub trait CryptoProvider: Send + Sync {
    fn sha256(&self, data: &[u8]) -> [u8; 32];

    fn ripemd160(&self, data: &[u8]) -> [u8; 20];

    /// ECDSA over secp256k1 with an explicit nonce. Returns the raw (r, s)
    /// pair; callers wrap it into a DER signature.
    fn ecdsa_sign(
        &self,
        privkey: &[u8; 32],
        digest: &[u8; 32],
        nonce: &BigUint,
    ) -> Result<(BigUint, BigUint), SignError>;

    /// True iff (r, s) is a valid signature over `digest` for the 65-byte
    /// uncompressed public key.
    fn ecdsa_verify(&self, pubkey: &[u8], digest: &[u8; 32], r: &BigUint, s: &BigUint) -> bool;

    /// 65-byte uncompressed (0x04 ‖ X ‖ Y) public key for a secret scalar.
    fn derive_pubkey(&self, privkey: &[u8; 32]) -> Result<Vec<u8>, SignError>;

    /// The group order n.
    fn group_order(&self) -> BigUint;
}

/// Default provider, backed by the pure-Rust `k256` arithmetic.
#[derive(Debug, Clone, Copy, Default)]
pub struct Secp256k1Provider;

impl Secp256k1Provider {
    pub fn new() -> Self {
        Secp256k1Provider
    }
}

fn scalar_from_be_bytes(bytes: &[u8; 32]) -> Option<Scalar> {
    Option::from(Scalar::from_repr((*bytes).into()))
}

fn scalar_from_biguint(value: &BigUint) -> Option<Scalar> {
    let raw = value.to_bytes_be();
    if raw.len() > 32 {
        return None;
    }
    let mut repr = [0u8; 32];
    repr[32 - raw.len()..].copy_from_slice(&raw);
    scalar_from_be_bytes(&repr)
}

fn biguint_from_scalar(s: &Scalar) -> BigUint {
    BigUint::from_bytes_be(&s.to_bytes())
}

fn reduce_digest(digest: &[u8; 32]) -> Scalar {
    <Scalar as Reduce<U256>>::reduce_bytes(digest.into())
}

fn nonzero(s: Scalar) -> Option<Scalar> {
    if bool::from(s.is_zero()) {
        None
    } else {
        Some(s)
    }
}

impl CryptoProvider for Secp256k1Provider {
    fn sha256(&self, data: &[u8]) -> [u8; 32] {
        crate::hashes::sha256(data)
    }

    fn ripemd160(&self, data: &[u8]) -> [u8; 20] {
        crate::hashes::ripemd160(data)
    }

    fn ecdsa_sign(
        &self,
        privkey: &[u8; 32],
        digest: &[u8; 32],
        nonce: &BigUint,
    ) -> Result<(BigUint, BigUint), SignError> {
        let d = scalar_from_be_bytes(privkey)
            .and_then(nonzero)
            .ok_or(SignError::InvalidKey)?;
        let k = scalar_from_biguint(nonce)
            .and_then(nonzero)
            .ok_or(SignError::InvalidNonce)?;

        let kg = (ProjectivePoint::GENERATOR * k).to_affine();
        let r = nonzero(<Scalar as Reduce<U256>>::reduce_bytes(&kg.x()))
            .ok_or(SignError::InvalidNonce)?;
        let z = reduce_digest(digest);
        let k_inv = Option::<Scalar>::from(k.invert()).expect("nonce is nonzero");
        let s = nonzero(k_inv * (z + r * d)).ok_or(SignError::InvalidNonce)?;

        Ok((biguint_from_scalar(&r), biguint_from_scalar(&s)))
    }

    fn ecdsa_verify(&self, pubkey: &[u8], digest: &[u8; 32], r: &BigUint, s: &BigUint) -> bool {
        if pubkey.len() != 65 || pubkey[0] != 0x04 {
            return false;
        }
        let Ok(encoded) = EncodedPoint::from_bytes(pubkey) else {
            return false;
        };
        let Some(q) = Option::<AffinePoint>::from(AffinePoint::from_encoded_point(&encoded)) else {
            return false;
        };
        let (Some(r), Some(s)) = (
            scalar_from_biguint(r).and_then(nonzero),
            scalar_from_biguint(s).and_then(nonzero),
        ) else {
            return false;
        };

        let z = reduce_digest(digest);
        let s_inv = Option::<Scalar>::from(s.invert()).expect("s is nonzero");
        let u1 = z * s_inv;
        let u2 = r * s_inv;
        let point = ProjectivePoint::GENERATOR * u1 + ProjectivePoint::from(q) * u2;
        if bool::from(point.is_identity()) {
            return false;
        }
        <Scalar as Reduce<U256>>::reduce_bytes(&point.to_affine().x()) == r
    }

    fn derive_pubkey(&self, privkey: &[u8; 32]) -> Result<Vec<u8>, SignError> {
        let d = scalar_from_be_bytes(privkey)
            .and_then(nonzero)
            .ok_or(SignError::InvalidKey)?;
        let point = (ProjectivePoint::GENERATOR * d).to_affine();
        Ok(point.to_encoded_point(false).as_bytes().to_vec())
    }

    fn group_order(&self) -> BigUint {
        secp256k1_order().clone()
    }
}
