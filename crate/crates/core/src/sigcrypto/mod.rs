//! DER signature codec, ECDSA s-negation, the all-inputs sighash, and
//! transaction signing/verification over a pluggable [`CryptoProvider`].
//!
//! Signature wire form: `DER(SEQUENCE(INTEGER r, INTEGER s)) ‖ sighash byte`.
//! Strict encoding is canonical DER with minimal integer lengths; the lax
//! parse additionally accepts integers padded with superfluous leading zero
//! bytes, which is exactly the variant the padding mutation produces.

mod provider;

pub use provider::{CryptoProvider, Secp256k1Provider};

use std::sync::OnceLock;

use num_bigint::BigUint;
use thiserror::Error;

use crate::hashes::hash160;
use crate::script::SignatureChecker;
use crate::tx::{serialize_tx, Transaction};

/// The only sighash flag generated or signed by this toolkit.
pub const SIGHASH_ALL: u8 = 0x01;

/// secp256k1 group order n.
pub fn secp256k1_order() -> &'static BigUint {
    static ORDER: OnceLock<BigUint> = OnceLock::new();
    ORDER.get_or_init(|| {
        BigUint::parse_bytes(
            b"FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141",
            16,
        )
        .expect("constant parses")
    })
}

/// An ECDSA signature as carried in a claiming script: the (r, s) pair plus
/// the trailing sighash flag byte.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerSignature {
    pub r: BigUint,
    pub s: BigUint,
    pub sighash_flag: u8,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DerError {
    #[error("malformed DER: {0}")]
    MalformedDer(&'static str),
    #[error("signature integer out of range")]
    IntegerOutOfRange,
}

/// How tolerant the parser is of the documented non-canonical variant.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DerMode {
    Strict,
    Lax,
}

/// A parsed signature plus whether its encoding was canonical.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ParsedDer {
    pub sig: DerSignature,
    pub strict: bool,
}

/// Encodes `sig` as DER followed by the sighash byte. With `strict` the
/// integers are minimal; without it each integer carries one superfluous
/// leading zero byte (the padded variant used by the padding mutation).
pub fn encode_der(sig: &DerSignature, strict: bool) -> Vec<u8> {
    let r = int_to_der_bytes(&sig.r, !strict);
    let s = int_to_der_bytes(&sig.s, !strict);
    let content_len = r.len() + s.len() + 4;
    debug_assert!(
        content_len < 0x80,
        "signature integers fit short-form lengths"
    );

    let mut out = Vec::with_capacity(content_len + 3);
    out.push(0x30);
    out.push(content_len as u8);
    out.push(0x02);
    out.push(r.len() as u8);
    out.extend_from_slice(&r);
    out.push(0x02);
    out.push(s.len() as u8);
    out.extend_from_slice(&s);
    out.push(sig.sighash_flag);
    out
}

fn int_to_der_bytes(value: &BigUint, pad: bool) -> Vec<u8> {
    let mut bytes = value.to_bytes_be();
    if bytes[0] & 0x80 != 0 {
        bytes.insert(0, 0);
    }
    if pad {
        bytes.insert(0, 0);
    }
    bytes
}

/// Parses a claiming-script signature push. Strict mode accepts canonical
/// DER only; lax mode also accepts zero-padded integers and reports the
/// encoding as non-strict.
pub fn parse_der(bytes: &[u8], mode: DerMode) -> Result<ParsedDer, DerError> {
    if bytes.len() < 3 {
        return Err(DerError::MalformedDer("too short"));
    }
    if bytes[0] != 0x30 {
        return Err(DerError::MalformedDer("missing sequence tag"));
    }
    let seq_len = bytes[1];
    if seq_len & 0x80 != 0 {
        return Err(DerError::MalformedDer("long-form length"));
    }
    // Sequence header (2) + content + sighash flag (1).
    if seq_len as usize + 3 != bytes.len() {
        return Err(DerError::MalformedDer("sequence length mismatch"));
    }

    let mut cursor = 2;
    let (r, r_minimal) = parse_der_int(bytes, &mut cursor, mode)?;
    let (s, s_minimal) = parse_der_int(bytes, &mut cursor, mode)?;
    if cursor != bytes.len() - 1 {
        return Err(DerError::MalformedDer("unexpected bytes after integers"));
    }
    let sighash_flag = bytes[cursor];

    let n = secp256k1_order();
    if r.bits() == 0 || s.bits() == 0 || &r >= n || &s >= n {
        return Err(DerError::IntegerOutOfRange);
    }

    Ok(ParsedDer {
        sig: DerSignature { r, s, sighash_flag },
        strict: r_minimal && s_minimal,
    })
}

fn parse_der_int(
    bytes: &[u8],
    cursor: &mut usize,
    mode: DerMode,
) -> Result<(BigUint, bool), DerError> {
    if bytes.len() < *cursor + 2 {
        return Err(DerError::MalformedDer("truncated integer header"));
    }
    if bytes[*cursor] != 0x02 {
        return Err(DerError::MalformedDer("missing integer tag"));
    }
    let len = bytes[*cursor + 1];
    if len & 0x80 != 0 {
        return Err(DerError::MalformedDer("long-form length"));
    }
    if len == 0 {
        return Err(DerError::MalformedDer("empty integer"));
    }
    let start = *cursor + 2;
    let content = bytes
        .get(start..start + len as usize)
        .ok_or(DerError::MalformedDer("truncated integer"))?;
    if content[0] & 0x80 != 0 {
        return Err(DerError::MalformedDer("negative integer"));
    }
    let minimal = !(content.len() > 1 && content[0] == 0 && content[1] & 0x80 == 0);
    if !minimal && mode == DerMode::Strict {
        return Err(DerError::MalformedDer("padded integer"));
    }
    *cursor = start + len as usize;
    Ok((BigUint::from_bytes_be(content), minimal))
}

/// The equivalent signature with s replaced by n − s. Involution; verifies
/// for the same key and digest by curve symmetry.
pub fn negate_s(sig: &DerSignature, n: &BigUint) -> DerSignature {
    DerSignature {
        r: sig.r.clone(),
        s: n - &sig.s,
        sighash_flag: sig.sighash_flag,
    }
}

/// True iff s ≤ n/2. Exactly one of a signature and its negation is low-s.
pub fn is_low_s(sig: &DerSignature, n: &BigUint) -> bool {
    sig.s <= (n >> 1)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignError {
    #[error("input index out of range")]
    IndexOutOfRange,
    #[error("nonce outside [1, n-1] or degenerate")]
    InvalidNonce,
    #[error("secret key outside [1, n-1]")]
    InvalidKey,
}

/// Digest signed for one input under SIGHASH_ALL: the transaction with every
/// claiming script emptied except `input_index`, which temporarily carries
/// the claiming condition of the referenced output, serialized and suffixed
/// with the 4-byte little-endian flag, then double-SHA256.
pub fn sighash_all(
    tx: &Transaction,
    input_index: usize,
    referenced_script_pubkey: &[u8],
) -> Result<[u8; 32], SignError> {
    if input_index >= tx.inputs.len() {
        return Err(SignError::IndexOutOfRange);
    }
    let mut templated = tx.clone();
    for (i, input) in templated.inputs.iter_mut().enumerate() {
        input.script_sig = if i == input_index {
            referenced_script_pubkey.to_vec()
        } else {
            Vec::new()
        };
    }
    let mut bytes = serialize_tx(&templated);
    bytes.extend_from_slice(&u32::from(SIGHASH_ALL).to_le_bytes());
    Ok(*crate::hashes::double_sha256(&bytes).as_bytes())
}

/// An ECDSA key pair plus the derived 20-byte address hash.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KeyPair {
    pub privkey: [u8; 32],
    /// 65-byte uncompressed public key.
    pub pubkey: Vec<u8>,
    /// RIPEMD160(SHA256(pubkey)).
    pub address_hash: [u8; 20],
}

impl KeyPair {
    pub fn from_privkey(
        privkey: [u8; 32],
        provider: &dyn CryptoProvider,
    ) -> Result<KeyPair, SignError> {
        let pubkey = provider.derive_pubkey(&privkey)?;
        let address_hash = hash160(&pubkey);
        Ok(KeyPair {
            privkey,
            pubkey,
            address_hash,
        })
    }
}

/// Draws secret-key bytes until they form a valid scalar.
pub fn random_keypair<R: rand::Rng>(rng: &mut R, provider: &dyn CryptoProvider) -> KeyPair {
    loop {
        let mut privkey = [0u8; 32];
        rng.fill(&mut privkey);
        if let Ok(keypair) = KeyPair::from_privkey(privkey, provider) {
            return keypair;
        }
    }
}

/// Draws a signing nonce uniformly from [1, n-1].
pub fn random_nonce<R: rand::Rng>(rng: &mut R) -> BigUint {
    let mut bytes = [0u8; 32];
    loop {
        rng.fill(&mut bytes);
        let nonce = BigUint::from_bytes_be(&bytes);
        if nonce.bits() != 0 && &nonce < secp256k1_order() {
            return nonce;
        }
    }
}

/// Signs one input under SIGHASH_ALL with an explicit nonce.
pub fn sign_input(
    tx: &Transaction,
    input_index: usize,
    referenced_script_pubkey: &[u8],
    keypair: &KeyPair,
    provider: &dyn CryptoProvider,
    nonce: &BigUint,
) -> Result<DerSignature, SignError> {
    let digest = sighash_all(tx, input_index, referenced_script_pubkey)?;
    let (r, s) = provider.ecdsa_sign(&keypair.privkey, &digest, nonce)?;
    Ok(DerSignature {
        r,
        s,
        sighash_flag: SIGHASH_ALL,
    })
}

/// True iff `sig` signs the given input of `tx` for `pubkey`.
pub fn verify_input(
    tx: &Transaction,
    input_index: usize,
    referenced_script_pubkey: &[u8],
    pubkey: &[u8],
    sig: &DerSignature,
    provider: &dyn CryptoProvider,
) -> Result<bool, SignError> {
    let digest = sighash_all(tx, input_index, referenced_script_pubkey)?;
    Ok(provider.ecdsa_verify(pubkey, &digest, &sig.r, &sig.s))
}

/// [`SignatureChecker`] over the real sighash of one transaction input;
/// signatures are parsed leniently, matching the era's script validation.
pub struct TxSignatureChecker<'a> {
    pub tx: &'a Transaction,
    pub input_index: usize,
    pub script_pubkey: &'a [u8],
    pub provider: &'a dyn CryptoProvider,
}

impl SignatureChecker for TxSignatureChecker<'_> {
    fn check_sig(&self, sig: &[u8], pubkey: &[u8]) -> bool {
        let Ok(parsed) = parse_der(sig, DerMode::Lax) else {
            return false;
        };
        if parsed.sig.sighash_flag != SIGHASH_ALL {
            return false;
        }
        let Ok(digest) = sighash_all(self.tx, self.input_index, self.script_pubkey) else {
            return false;
        };
        self.provider
            .ecdsa_verify(pubkey, &digest, &parsed.sig.r, &parsed.sig.s)
    }
}
