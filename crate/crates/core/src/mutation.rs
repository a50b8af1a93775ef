//! The attacker's move and the analyst's inverse: generate malleated
//! variants of a transaction, and classify observed conflicting pairs by
//! mutation vector.
//!
//! A mutation changes exactly one claiming script, never the signed content:
//! the transaction id changes, the normalized key and the outputs do not,
//! and script execution stays valid.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflict::normalized_key;
use crate::script::{
    match_template, sig_script, PushEncoding, PushOp, Script, ScriptInstr, Template, TemplateKind,
};
use crate::sigcrypto::{
    encode_der, is_low_s, negate_s, parse_der, secp256k1_order, sign_input, CryptoProvider,
    DerMode, KeyPair, ParsedDer, SignError,
};
use crate::tx::Transaction;

/// The known ways to alter a claiming script without invalidating its
/// signature. Numbering follows the classic malleability inventory.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    /// 1: replace s with n − s; both encode the same curve point.
    EcdsaNegateS,
    /// 2: non-canonical DER, here zero-padded integers.
    LaxDerPadding,
    /// 3: extra data pushed ahead of the claiming script.
    ExtraPush,
    /// 4: operands computed on the fly instead of pushed directly.
    ComputedOperands,
    /// 5: non-minimal encoding of push operations.
    NonMinimalPush,
    /// 6: zero-padded pushes of numeric strings.
    ZeroPaddedNumber,
    /// 7: pushes consumed by an OP_DROP in the claiming condition.
    IgnoredDrop,
    /// 8: alternative sighash flags.
    SighashFlag,
    /// 9: a fresh signature from whoever holds the key.
    ReSign,
}

impl MutationKind {
    /// All vectors, in inventory order.
    pub const ALL: [MutationKind; 9] = [
        MutationKind::EcdsaNegateS,
        MutationKind::LaxDerPadding,
        MutationKind::ExtraPush,
        MutationKind::ComputedOperands,
        MutationKind::NonMinimalPush,
        MutationKind::ZeroPaddedNumber,
        MutationKind::IgnoredDrop,
        MutationKind::SighashFlag,
        MutationKind::ReSign,
    ];

    /// Vectors with a generator in this toolkit. The rest are
    /// classification categories only: they require script shapes outside
    /// the standard templates or multi-flag sighash support.
    pub const IMPLEMENTED: [MutationKind; 5] = [
        MutationKind::EcdsaNegateS,
        MutationKind::LaxDerPadding,
        MutationKind::ExtraPush,
        MutationKind::NonMinimalPush,
        MutationKind::ReSign,
    ];

    pub fn implemented(self) -> bool {
        MutationKind::IMPLEMENTED.contains(&self)
    }

    /// Position in the classic inventory, 1-based.
    pub fn vector_number(self) -> u8 {
        MutationKind::ALL.iter().position(|k| *k == self).unwrap() as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            MutationKind::EcdsaNegateS => "ecdsa_negate_s",
            MutationKind::LaxDerPadding => "lax_der_padding",
            MutationKind::ExtraPush => "extra_push",
            MutationKind::ComputedOperands => "computed_operands",
            MutationKind::NonMinimalPush => "non_minimal_push",
            MutationKind::ZeroPaddedNumber => "zero_padded_number",
            MutationKind::IgnoredDrop => "ignored_drop",
            MutationKind::SighashFlag => "sighash_flag",
            MutationKind::ReSign => "re_sign",
        }
    }

    pub fn from_name(name: &str) -> Option<MutationKind> {
        MutationKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// Key material and parameters a mutation may need. Only `ReSign` consumes
/// the key, nonce, and referenced claiming condition.
pub struct MutationContext<'a> {
    pub provider: &'a dyn CryptoProvider,
    pub keypair: Option<&'a KeyPair>,
    pub nonce: Option<BigUint>,
    pub referenced_script_pubkey: Option<&'a [u8]>,
}

impl<'a> MutationContext<'a> {
    /// Context for the kinds that need no key material.
    pub fn bare(provider: &'a dyn CryptoProvider) -> Self {
        MutationContext {
            provider,
            keypair: None,
            nonce: None,
            referenced_script_pubkey: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MutationError {
    #[error("mutation not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("missing context: {0}")]
    MissingContext(&'static str),
    #[error("transactions do not share a normalized key")]
    KeyMismatch,
    #[error(transparent)]
    Sign(#[from] SignError),
}

/// How a conflicting pair relates, and which member is inferred original.
///
/// The original is inferred by convention — minimal, strict, low-s, or
/// shorter side — matching what wallets of the era emitted; for the low-s
/// tie-break this is a convention, not ground truth.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PairClassification {
    EncodingMutation {
        kind: MutationKind,
        /// 0 or 1: which argument of `classify_pair` is the original.
        original_index: usize,
    },
    GenuineReSign,
    Unknown,
}

/// Returns `tx` with only `inputs[input_index].script_sig` changed according
/// to `kind`. The txid changes; the normalized key, execution validity, and
/// the outputs do not.
pub fn mutate(
    tx: &Transaction,
    kind: MutationKind,
    input_index: usize,
    ctx: &MutationContext<'_>,
) -> Result<Transaction, MutationError> {
    if !kind.implemented() {
        return Err(MutationError::NotApplicable("kind has no generator"));
    }
    let input = tx
        .inputs
        .get(input_index)
        .ok_or(MutationError::NotApplicable("input index out of range"))?;
    let script = Script::parse(&input.script_sig)
        .map_err(|_| MutationError::NotApplicable("claiming script does not parse"))?;
    let Template::SigScript {
        prefix_pushes,
        sig_push,
        pubkey_push,
    } = match_template(&script, TemplateKind::Claiming)
    else {
        return Err(MutationError::NotApplicable(
            "claiming script is not a signature script",
        ));
    };
    if kind != MutationKind::ExtraPush && !prefix_pushes.is_empty() {
        return Err(MutationError::NotApplicable(
            "claiming script carries prefix pushes",
        ));
    }

    let mutated = match kind {
        MutationKind::NonMinimalPush => {
            if !sig_push.is_minimal() || !pubkey_push.is_minimal() {
                return Err(MutationError::NotApplicable("pushes already non-minimal"));
            }
            Script {
                instrs: vec![
                    ScriptInstr::Push(PushOp {
                        encoding: PushEncoding::PushData2,
                        payload: sig_push.payload,
                    }),
                    ScriptInstr::Push(PushOp {
                        encoding: PushEncoding::PushData2,
                        payload: pubkey_push.payload,
                    }),
                ],
            }
        }
        MutationKind::EcdsaNegateS => {
            let parsed = parse_der(&sig_push.payload, DerMode::Strict)
                .map_err(|_| MutationError::NotApplicable("signature is not strict DER"))?;
            let negated = negate_s(&parsed.sig, secp256k1_order());
            Script {
                instrs: vec![
                    ScriptInstr::Push(refit(sig_push.encoding, encode_der(&negated, true))),
                    ScriptInstr::Push(pubkey_push),
                ],
            }
        }
        MutationKind::LaxDerPadding => {
            let parsed = parse_der(&sig_push.payload, DerMode::Strict).map_err(|_| {
                MutationError::NotApplicable("signature already non-strict or unparseable")
            })?;
            Script {
                instrs: vec![
                    ScriptInstr::Push(refit(sig_push.encoding, encode_der(&parsed.sig, false))),
                    ScriptInstr::Push(pubkey_push),
                ],
            }
        }
        MutationKind::ExtraPush => {
            let mut instrs = script.instrs.clone();
            instrs.insert(0, ScriptInstr::Push(PushOp::minimal(vec![0x51])));
            Script { instrs }
        }
        MutationKind::ReSign => {
            let keypair = ctx
                .keypair
                .ok_or(MutationError::MissingContext("re-signing requires a key"))?;
            let nonce = ctx
                .nonce
                .as_ref()
                .ok_or(MutationError::MissingContext("re-signing requires a nonce"))?;
            let spk = ctx
                .referenced_script_pubkey
                .ok_or(MutationError::MissingContext(
                    "re-signing requires the referenced claiming condition",
                ))?;
            if keypair.pubkey != pubkey_push.payload {
                return Err(MutationError::NotApplicable(
                    "context key does not match the claiming script",
                ));
            }
            let sig = sign_input(tx, input_index, spk, keypair, ctx.provider, nonce)?;
            sig_script(&encode_der(&sig, true), &keypair.pubkey)
        }
        _ => unreachable!("unimplemented kinds rejected above"),
    };

    let bytes = mutated.encode();
    if bytes == input.script_sig {
        return Err(MutationError::NotApplicable(
            "mutation reproduced the original script",
        ));
    }
    let mut out = tx.clone();
    out.inputs[input_index].script_sig = bytes;
    Ok(out)
}

/// Keeps the original push flavor when the new payload still fits it.
fn refit(encoding: PushEncoding, payload: Vec<u8>) -> PushOp {
    if payload.len() <= encoding.capacity() {
        PushOp { encoding, payload }
    } else {
        PushOp::minimal(payload)
    }
}

/// All `(input_index, kind)` pairs whose mutation precondition holds, in
/// deterministic order: input index first, then inventory order.
pub fn enumerate_applicable(
    tx: &Transaction,
    ctx: &MutationContext<'_>,
) -> Vec<(usize, MutationKind)> {
    let mut out = Vec::new();
    for index in 0..tx.inputs.len() {
        for kind in MutationKind::IMPLEMENTED {
            if mutate(tx, kind, index, ctx).is_ok() {
                out.push((index, kind));
            }
        }
    }
    out
}

/// Classifies two transactions sharing a normalized key.
///
/// Returns `KeyMismatch` if they do not actually share one. The result is
/// symmetric in its arguments: kind and inferred-original transaction agree
/// whichever way the pair is passed.
pub fn classify_pair(
    a: &Transaction,
    b: &Transaction,
) -> Result<PairClassification, MutationError> {
    if normalized_key(a) != normalized_key(b) {
        return Err(MutationError::KeyMismatch);
    }
    if a == b {
        return Ok(PairClassification::Unknown);
    }

    let (Some(side_a), Some(side_b)) = (parse_side(a), parse_side(b)) else {
        return Ok(PairClassification::Unknown);
    };
    debug_assert_eq!(
        side_a.len(),
        side_b.len(),
        "equal keys imply equal input counts"
    );

    if let Some(original_index) = rule_non_minimal(&side_a, &side_b) {
        return Ok(PairClassification::EncodingMutation {
            kind: MutationKind::NonMinimalPush,
            original_index,
        });
    }
    if let Some(classification) = rule_signature_only(&side_a, &side_b) {
        return Ok(classification);
    }
    if let Some(original_index) = rule_extra_push(&side_a, &side_b) {
        return Ok(PairClassification::EncodingMutation {
            kind: MutationKind::ExtraPush,
            original_index,
        });
    }
    Ok(PairClassification::Unknown)
}

fn parse_side(tx: &Transaction) -> Option<Vec<Script>> {
    tx.inputs
        .iter()
        .map(|i| Script::parse(&i.script_sig).ok())
        .collect()
}

fn fully_minimal(script: &Script) -> bool {
    script
        .instrs
        .iter()
        .all(|i| i.as_push().is_none_or(|p| p.is_minimal()))
}

/// Push payloads byte-identical everywhere, exactly one side fully minimal.
fn rule_non_minimal(side_a: &[Script], side_b: &[Script]) -> Option<usize> {
    let same_content = side_a
        .iter()
        .zip(side_b)
        .all(|(x, y)| x.minimalize() == y.minimalize());
    if !same_content {
        return None;
    }
    match (
        side_a.iter().all(fully_minimal),
        side_b.iter().all(fully_minimal),
    ) {
        (true, false) => Some(0),
        (false, true) => Some(1),
        _ => None,
    }
}

/// Rules over pairs that are structurally equal except for signature push
/// payloads: DER padding, s-negation, and genuine re-signs.
fn rule_signature_only(side_a: &[Script], side_b: &[Script]) -> Option<PairClassification> {
    let mut diffs: Vec<(ParsedDer, ParsedDer)> = Vec::new();
    for (x, y) in side_a.iter().zip(side_b) {
        let (
            Template::SigScript {
                prefix_pushes: px,
                sig_push: sx,
                pubkey_push: kx,
            },
            Template::SigScript {
                prefix_pushes: py,
                sig_push: sy,
                pubkey_push: ky,
            },
        ) = (
            match_template(x, TemplateKind::Claiming),
            match_template(y, TemplateKind::Claiming),
        )
        else {
            return None;
        };
        if px != py || kx != ky || sx.encoding != sy.encoding {
            return None;
        }
        if sx.payload == sy.payload {
            continue;
        }
        let (Ok(dx), Ok(dy)) = (
            parse_der(&sx.payload, DerMode::Lax),
            parse_der(&sy.payload, DerMode::Lax),
        ) else {
            return None;
        };
        diffs.push((dx, dy));
    }
    if diffs.is_empty() {
        return None;
    }
    // Differing sighash flags would be vector 8, which this classifier does
    // not attribute.
    if diffs
        .iter()
        .any(|(x, y)| x.sig.sighash_flag != y.sig.sighash_flag)
    {
        return None;
    }

    // Same (r, s) everywhere: only the encoding differs, i.e. padding.
    if diffs
        .iter()
        .all(|(x, y)| x.sig.r == y.sig.r && x.sig.s == y.sig.s)
    {
        return match (
            diffs.iter().all(|(x, _)| x.strict),
            diffs.iter().all(|(_, y)| y.strict),
        ) {
            (true, false) => Some(PairClassification::EncodingMutation {
                kind: MutationKind::LaxDerPadding,
                original_index: 0,
            }),
            (false, true) => Some(PairClassification::EncodingMutation {
                kind: MutationKind::LaxDerPadding,
                original_index: 1,
            }),
            _ => None,
        };
    }

    // The remaining rules only attribute canonical encodings.
    if !diffs.iter().all(|(x, y)| x.strict && y.strict) {
        return None;
    }

    let n = secp256k1_order();
    let negated = |x: &ParsedDer, y: &ParsedDer| x.sig.r == y.sig.r && &x.sig.s + &y.sig.s == *n;

    if diffs.iter().all(|(x, y)| negated(x, y)) {
        return match (
            diffs.iter().all(|(x, _)| is_low_s(&x.sig, n)),
            diffs.iter().all(|(_, y)| is_low_s(&y.sig, n)),
        ) {
            (true, false) => Some(PairClassification::EncodingMutation {
                kind: MutationKind::EcdsaNegateS,
                original_index: 0,
            }),
            (false, true) => Some(PairClassification::EncodingMutation {
                kind: MutationKind::EcdsaNegateS,
                original_index: 1,
            }),
            _ => None,
        };
    }
    if diffs.iter().any(|(x, y)| negated(x, y)) {
        // A mix of negated and re-signed inputs is not attributable.
        return None;
    }

    // Distinct valid strict-DER signatures, not related by negation.
    Some(PairClassification::GenuineReSign)
}

/// One side equals the other plus leading pushes; original is the shorter.
fn rule_extra_push(side_a: &[Script], side_b: &[Script]) -> Option<usize> {
    let mut extended_side: Option<usize> = None;
    for (x, y) in side_a.iter().zip(side_b) {
        if x == y {
            continue;
        }
        let (longer, shorter, side) = if x.instrs.len() > y.instrs.len() {
            (x, y, 0)
        } else if y.instrs.len() > x.instrs.len() {
            (y, x, 1)
        } else {
            return None;
        };
        let extra = longer.instrs.len() - shorter.instrs.len();
        let prefix_is_pushes = longer.instrs[..extra].iter().all(|i| i.as_push().is_some());
        if !prefix_is_pushes || longer.instrs[extra..] != shorter.instrs[..] {
            return None;
        }
        match extended_side {
            None => extended_side = Some(side),
            Some(prev) if prev == side => {}
            Some(_) => return None,
        }
    }
    extended_side.map(|ext| 1 - ext)
}
