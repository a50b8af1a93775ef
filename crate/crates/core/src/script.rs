//! Claiming scripts and claiming conditions: byte-faithful parsing, push
//! minimality, the standard templates, and the stack-machine interpreter for
//! the standard-transaction opcode subset.
//!
//! Execution follows the pre-BIP62 rules of the measured era: non-minimal
//! pushes and leftover stack elements do not invalidate a script; a truthy
//! top-of-stack after both scripts ran back to back is enough.

use std::fmt;

use thiserror::Error;

use crate::hashes::hash160;

pub const OP_PUSHDATA1: u8 = 0x4C;
pub const OP_PUSHDATA2: u8 = 0x4D;
pub const OP_PUSHDATA4: u8 = 0x4E;
pub const OP_DROP: u8 = 0x75;
pub const OP_DUP: u8 = 0x76;
pub const OP_EQUALVERIFY: u8 = 0x88;
pub const OP_HASH160: u8 = 0xA9;
pub const OP_CHECKSIG: u8 = 0xAC;

/// Largest push payload accepted anywhere in the toolkit.
pub const MAX_PUSH_LEN: usize = 10_000;
/// Combined instruction budget for one script-pair execution.
pub const MAX_INSTRS: usize = 201;

/// How a push is written on the wire. `Direct` is the single length byte
/// 0x00–0x4B (0x00 pushes the empty string); the others carry an explicit
/// little-endian length of 1, 2, or 4 bytes.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum PushEncoding {
    Direct,
    PushData1,
    PushData2,
    PushData4,
}

impl PushEncoding {
    /// Largest payload this flavor can carry.
    pub fn capacity(self) -> usize {
        match self {
            PushEncoding::Direct => 75,
            PushEncoding::PushData1 => 0xFF,
            PushEncoding::PushData2 => 0xFFFF,
            PushEncoding::PushData4 => 0xFFFF_FFFF,
        }
    }

    fn header_len(self) -> usize {
        match self {
            PushEncoding::Direct => 1,
            PushEncoding::PushData1 => 2,
            PushEncoding::PushData2 => 3,
            PushEncoding::PushData4 => 5,
        }
    }
}

/// The shortest flavor capable of carrying a payload of `len` bytes.
pub fn minimal_encoding_for(len: usize) -> PushEncoding {
    match len {
        0..=75 => PushEncoding::Direct,
        76..=255 => PushEncoding::PushData1,
        256..=65535 => PushEncoding::PushData2,
        _ => PushEncoding::PushData4,
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct PushOp {
    pub encoding: PushEncoding,
    pub payload: Vec<u8>,
}

impl PushOp {
    /// Push with the minimal encoding for its payload length.
    pub fn minimal(payload: Vec<u8>) -> PushOp {
        PushOp {
            encoding: minimal_encoding_for(payload.len()),
            payload,
        }
    }

    pub fn is_minimal(&self) -> bool {
        self.encoding == minimal_encoding_for(self.payload.len())
    }

    pub fn encoded_len(&self) -> usize {
        self.encoding.header_len() + self.payload.len()
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        let len = self.payload.len();
        assert!(
            len <= self.encoding.capacity(),
            "payload exceeds flavor capacity"
        );
        match self.encoding {
            PushEncoding::Direct => out.push(len as u8),
            PushEncoding::PushData1 => {
                out.push(OP_PUSHDATA1);
                out.push(len as u8);
            }
            PushEncoding::PushData2 => {
                out.push(OP_PUSHDATA2);
                out.extend_from_slice(&(len as u16).to_le_bytes());
            }
            PushEncoding::PushData4 => {
                out.push(OP_PUSHDATA4);
                out.extend_from_slice(&(len as u32).to_le_bytes());
            }
        }
        out.extend_from_slice(&self.payload);
    }
}

/// True iff the encoding flavor is the shortest one capable of carrying the
/// payload.
pub fn is_minimal_push(p: &PushOp) -> bool {
    p.is_minimal()
}

/// Non-push opcodes. `Other` never shadows a named opcode or a push opcode.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Opcode {
    Dup,
    Hash160,
    EqualVerify,
    CheckSig,
    Drop,
    Other(u8),
}

impl Opcode {
    /// Maps a non-push byte to its opcode. Callers must not pass bytes in
    /// the push range 0x00–0x4E.
    pub fn from_byte(b: u8) -> Opcode {
        debug_assert!(b > OP_PUSHDATA4, "push bytes are not opcodes");
        match b {
            OP_DUP => Opcode::Dup,
            OP_HASH160 => Opcode::Hash160,
            OP_EQUALVERIFY => Opcode::EqualVerify,
            OP_CHECKSIG => Opcode::CheckSig,
            OP_DROP => Opcode::Drop,
            other => Opcode::Other(other),
        }
    }

    pub fn to_byte(self) -> u8 {
        match self {
            Opcode::Dup => OP_DUP,
            Opcode::Hash160 => OP_HASH160,
            Opcode::EqualVerify => OP_EQUALVERIFY,
            Opcode::CheckSig => OP_CHECKSIG,
            Opcode::Drop => OP_DROP,
            Opcode::Other(b) => b,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub enum ScriptInstr {
    Push(PushOp),
    Op(Opcode),
}

impl ScriptInstr {
    pub fn as_push(&self) -> Option<&PushOp> {
        match self {
            ScriptInstr::Push(p) => Some(p),
            ScriptInstr::Op(_) => None,
        }
    }
}

/// A parsed script. Parsing is byte-faithful: the encoding flavor of every
/// push is preserved, so `encode(parse(b)) = b` for every parseable `b`.
#[derive(Clone, PartialEq, Eq, Debug, Default, Hash)]
pub struct Script {
    pub instrs: Vec<ScriptInstr>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptParseError {
    #[error("push at offset {offset} runs past the end of the script")]
    TruncatedPush { offset: usize },
    #[error("push at offset {offset} exceeds the {MAX_PUSH_LEN}-byte payload limit")]
    OversizedPush { offset: usize },
}

impl Script {
    pub fn parse(bytes: &[u8]) -> Result<Script, ScriptParseError> {
        let mut instrs = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let start = pos;
            let b = bytes[pos];
            pos += 1;
            let (encoding, len) = match b {
                0x00..=0x4B => (PushEncoding::Direct, b as usize),
                OP_PUSHDATA1 => {
                    let len = *bytes
                        .get(pos)
                        .ok_or(ScriptParseError::TruncatedPush { offset: start })?;
                    pos += 1;
                    (PushEncoding::PushData1, len as usize)
                }
                OP_PUSHDATA2 => {
                    let raw: [u8; 2] = bytes
                        .get(pos..pos + 2)
                        .ok_or(ScriptParseError::TruncatedPush { offset: start })?
                        .try_into()
                        .unwrap();
                    pos += 2;
                    (PushEncoding::PushData2, u16::from_le_bytes(raw) as usize)
                }
                OP_PUSHDATA4 => {
                    let raw: [u8; 4] = bytes
                        .get(pos..pos + 4)
                        .ok_or(ScriptParseError::TruncatedPush { offset: start })?
                        .try_into()
                        .unwrap();
                    pos += 4;
                    (PushEncoding::PushData4, u32::from_le_bytes(raw) as usize)
                }
                opcode => {
                    instrs.push(ScriptInstr::Op(Opcode::from_byte(opcode)));
                    continue;
                }
            };
            if len > MAX_PUSH_LEN {
                return Err(ScriptParseError::OversizedPush { offset: start });
            }
            let payload = bytes
                .get(pos..pos + len)
                .ok_or(ScriptParseError::TruncatedPush { offset: start })?
                .to_vec();
            pos += len;
            instrs.push(ScriptInstr::Push(PushOp { encoding, payload }));
        }
        Ok(Script { instrs })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for instr in &self.instrs {
            match instr {
                ScriptInstr::Push(p) => p.encode_into(&mut out),
                ScriptInstr::Op(op) => out.push(op.to_byte()),
            }
        }
        out
    }

    /// Re-encodes every push minimally, leaving other instructions and all
    /// push payloads unchanged. Idempotent.
    pub fn minimalize(&self) -> Script {
        Script {
            instrs: self
                .instrs
                .iter()
                .map(|instr| match instr {
                    ScriptInstr::Push(p) => ScriptInstr::Push(PushOp::minimal(p.payload.clone())),
                    op => op.clone(),
                })
                .collect(),
        }
    }

    /// Push payloads in execution order — the semantic content of a
    /// push-only script.
    pub fn push_payloads(&self) -> Vec<&[u8]> {
        self.instrs
            .iter()
            .filter_map(|i| i.as_push().map(|p| p.payload.as_slice()))
            .collect()
    }

    pub fn is_push_only(&self) -> bool {
        self.instrs.iter().all(|i| i.as_push().is_some())
    }
}

/// Which side of the spend a script sits on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TemplateKind {
    /// Output-side claiming condition.
    Condition,
    /// Input-side claiming script.
    Claiming,
}

/// Result of matching a script against the standard templates.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Template {
    /// `OP_DUP OP_HASH160 <20-byte hash> OP_EQUALVERIFY OP_CHECKSIG`, with
    /// the hash pushed minimally (any other encoding is NonStandard, so a
    /// match re-encodes to exactly the original bytes).
    P2pkhCondition {
        pubkey_hash: [u8; 20],
    },
    /// Two pushes — signature then public key — possibly preceded by extra
    /// pushes, which are reported in `prefix_pushes`.
    SigScript {
        prefix_pushes: Vec<PushOp>,
        sig_push: PushOp,
        pubkey_push: PushOp,
    },
    NonStandard,
}

pub fn match_template(script: &Script, kind: TemplateKind) -> Template {
    match kind {
        TemplateKind::Condition => match_condition(script),
        TemplateKind::Claiming => match_claiming(script),
    }
}

fn match_condition(script: &Script) -> Template {
    let i = &script.instrs;
    if i.len() != 5 {
        return Template::NonStandard;
    }
    let (
        ScriptInstr::Op(Opcode::Dup),
        ScriptInstr::Op(Opcode::Hash160),
        ScriptInstr::Push(push),
        ScriptInstr::Op(Opcode::EqualVerify),
        ScriptInstr::Op(Opcode::CheckSig),
    ) = (&i[0], &i[1], &i[2], &i[3], &i[4])
    else {
        return Template::NonStandard;
    };
    if push.payload.len() != 20 || !push.is_minimal() {
        return Template::NonStandard;
    }
    Template::P2pkhCondition {
        pubkey_hash: push.payload.as_slice().try_into().unwrap(),
    }
}

fn match_claiming(script: &Script) -> Template {
    if script.instrs.len() < 2 || !script.is_push_only() {
        return Template::NonStandard;
    }
    let pushes: Vec<PushOp> = script
        .instrs
        .iter()
        .map(|i| i.as_push().unwrap().clone())
        .collect();
    let n = pushes.len();
    Template::SigScript {
        prefix_pushes: pushes[..n - 2].to_vec(),
        sig_push: pushes[n - 2].clone(),
        pubkey_push: pushes[n - 1].clone(),
    }
}

/// Canonical claiming condition paying to a 20-byte public-key hash.
pub fn p2pkh_condition(pubkey_hash: &[u8; 20]) -> Script {
    Script {
        instrs: vec![
            ScriptInstr::Op(Opcode::Dup),
            ScriptInstr::Op(Opcode::Hash160),
            ScriptInstr::Push(PushOp::minimal(pubkey_hash.to_vec())),
            ScriptInstr::Op(Opcode::EqualVerify),
            ScriptInstr::Op(Opcode::CheckSig),
        ],
    }
}

/// Canonical claiming script: a signature push followed by a public-key
/// push, both minimally encoded.
pub fn sig_script(sig: &[u8], pubkey: &[u8]) -> Script {
    Script {
        instrs: vec![
            ScriptInstr::Push(PushOp::minimal(sig.to_vec())),
            ScriptInstr::Push(PushOp::minimal(pubkey.to_vec())),
        ],
    }
}

/// Validates a signature against a public key for the transaction input
/// being executed. Implemented by `sigcrypto` over the real sighash; tests
/// may stub it.
pub trait SignatureChecker {
    fn check_sig(&self, sig: &[u8], pubkey: &[u8]) -> bool;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("unsupported opcode 0x{0:02X}")]
    UnsupportedOpcode(u8),
    #[error("stack underflow")]
    StackUnderflow,
    #[error("combined instruction count exceeds {MAX_INSTRS}")]
    TooManyInstructions,
}

/// Runs the claiming script and the claiming condition back to back over one
/// stack. Returns true iff execution completes with a truthy top-of-stack;
/// a failed OP_EQUALVERIFY or OP_CHECKSIG yields false, not an error.
pub fn execute(
    script_sig: &Script,
    script_pubkey: &Script,
    checker: &dyn SignatureChecker,
) -> Result<bool, ExecError> {
    if script_sig.instrs.len() + script_pubkey.instrs.len() > MAX_INSTRS {
        return Err(ExecError::TooManyInstructions);
    }
    let mut stack: Vec<Vec<u8>> = Vec::new();
    for instr in script_sig.instrs.iter().chain(&script_pubkey.instrs) {
        match instr {
            ScriptInstr::Push(p) => stack.push(p.payload.clone()),
            ScriptInstr::Op(Opcode::Dup) => {
                let top = stack.last().ok_or(ExecError::StackUnderflow)?.clone();
                stack.push(top);
            }
            ScriptInstr::Op(Opcode::Hash160) => {
                let top = stack.pop().ok_or(ExecError::StackUnderflow)?;
                stack.push(hash160(&top).to_vec());
            }
            ScriptInstr::Op(Opcode::EqualVerify) => {
                if stack.len() < 2 {
                    return Err(ExecError::StackUnderflow);
                }
                let a = stack.pop().unwrap();
                let b = stack.pop().unwrap();
                if a != b {
                    // Verification abort: the spend is invalid, the
                    // interpreter itself did not fail.
                    return Ok(false);
                }
            }
            ScriptInstr::Op(Opcode::CheckSig) => {
                if stack.len() < 2 {
                    return Err(ExecError::StackUnderflow);
                }
                let pubkey = stack.pop().unwrap();
                let sig = stack.pop().unwrap();
                let ok = checker.check_sig(&sig, &pubkey);
                stack.push(if ok { vec![1] } else { vec![] });
            }
            ScriptInstr::Op(Opcode::Drop) => {
                stack.pop().ok_or(ExecError::StackUnderflow)?;
            }
            ScriptInstr::Op(Opcode::Other(b)) => return Err(ExecError::UnsupportedOpcode(*b)),
        }
    }
    Ok(stack.last().map(|top| is_truthy(top)).unwrap_or(false))
}

/// Nonzero and nonempty.
fn is_truthy(bytes: &[u8]) -> bool {
    !bytes.is_empty() && bytes.iter().any(|&b| b != 0)
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.encode()))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    struct Accept;
    impl SignatureChecker for Accept {
        fn check_sig(&self, _: &[u8], _: &[u8]) -> bool {
            true
        }
    }

    struct Reject;
    impl SignatureChecker for Reject {
        fn check_sig(&self, _: &[u8], _: &[u8]) -> bool {
            false
        }
    }

    fn direct_sig_script_bytes() -> Vec<u8> {
        let mut b = vec![0x48];
        b.extend(std::iter::repeat_n(0x11, 0x48));
        b.push(0x41);
        b.extend(std::iter::repeat_n(0x22, 0x41));
        b
    }

    fn pushdata2_sig_script_bytes() -> Vec<u8> {
        let mut b = vec![0x4D, 0x48, 0x00];
        b.extend(std::iter::repeat_n(0x11, 0x48));
        b.extend([0x4D, 0x41, 0x00]);
        b.extend(std::iter::repeat_n(0x22, 0x41));
        b
    }

    #[test]
    fn parses_direct_sig_script() {
        let s = Script::parse(&direct_sig_script_bytes()).unwrap();
        assert_eq!(s.instrs.len(), 2);
        let p0 = s.instrs[0].as_push().unwrap();
        let p1 = s.instrs[1].as_push().unwrap();
        assert_eq!(
            (p0.encoding, p0.payload.len()),
            (PushEncoding::Direct, 0x48)
        );
        assert_eq!(
            (p1.encoding, p1.payload.len()),
            (PushEncoding::Direct, 0x41)
        );
    }

    #[test]
    fn parses_pushdata2_sig_script() {
        let s = Script::parse(&pushdata2_sig_script_bytes()).unwrap();
        assert_eq!(s.instrs.len(), 2);
        let p0 = s.instrs[0].as_push().unwrap();
        let p1 = s.instrs[1].as_push().unwrap();
        assert_eq!(
            (p0.encoding, p0.payload.len()),
            (PushEncoding::PushData2, 0x48)
        );
        assert_eq!(
            (p1.encoding, p1.payload.len()),
            (PushEncoding::PushData2, 0x41)
        );
    }

    #[test]
    fn empty_bytes_parse_to_empty_script() {
        assert_eq!(Script::parse(&[]).unwrap(), Script::default());
    }

    #[test]
    fn truncated_push_reports_opcode_offset() {
        // OP_DUP then a direct push claiming 5 bytes with only 2 present.
        let bytes = [OP_DUP, 0x05, 0xAA, 0xBB];
        assert_eq!(
            Script::parse(&bytes),
            Err(ScriptParseError::TruncatedPush { offset: 1 })
        );
    }

    #[test]
    fn minimality_table() {
        let direct72 = PushOp {
            encoding: PushEncoding::Direct,
            payload: vec![0; 72],
        };
        let pd2_72 = PushOp {
            encoding: PushEncoding::PushData2,
            payload: vec![0; 72],
        };
        let pd1_200 = PushOp {
            encoding: PushEncoding::PushData1,
            payload: vec![0; 200],
        };
        assert!(is_minimal_push(&direct72));
        assert!(!is_minimal_push(&pd2_72));
        assert!(is_minimal_push(&pd1_200));
        // OP_0: the empty direct push is the minimal empty push.
        assert!(is_minimal_push(&PushOp::minimal(vec![])));
    }

    #[test]
    fn minimalize_shrinks_pushdata2_by_four_bytes() {
        let fat = Script::parse(&pushdata2_sig_script_bytes()).unwrap();
        let slim = fat.minimalize();
        assert_eq!(slim.encode(), direct_sig_script_bytes());
        assert_eq!(fat.encode().len() - slim.encode().len(), 4);
    }

    #[test]
    fn minimalize_is_identity_on_minimal_scripts() {
        let s = Script::parse(&direct_sig_script_bytes()).unwrap();
        assert_eq!(s.minimalize(), s);
        let op_only = Script {
            instrs: vec![ScriptInstr::Op(Opcode::Dup)],
        };
        assert_eq!(op_only.minimalize(), op_only);
    }

    #[test]
    fn condition_template_matches_exactly() {
        let hash = [7u8; 20];
        let cond = p2pkh_condition(&hash);
        assert_eq!(
            match_template(&cond, TemplateKind::Condition),
            Template::P2pkhCondition { pubkey_hash: hash }
        );
        // A non-minimal hash push re-encodes differently, so it must not match.
        let mut fat = cond.clone();
        fat.instrs[2] = ScriptInstr::Push(PushOp {
            encoding: PushEncoding::PushData1,
            payload: hash.to_vec(),
        });
        assert_eq!(
            match_template(&fat, TemplateKind::Condition),
            Template::NonStandard
        );
        assert_eq!(
            match_template(&cond, TemplateKind::Claiming),
            Template::NonStandard
        );
    }

    #[test]
    fn claiming_template_reports_prefix_pushes() {
        let plain = sig_script(&[1; 71], &[2; 65]);
        match match_template(&plain, TemplateKind::Claiming) {
            Template::SigScript { prefix_pushes, .. } => assert!(prefix_pushes.is_empty()),
            other => panic!("unexpected template: {other:?}"),
        }

        let mut prefixed = plain.clone();
        prefixed
            .instrs
            .insert(0, ScriptInstr::Push(PushOp::minimal(vec![0x51])));
        match match_template(&prefixed, TemplateKind::Claiming) {
            Template::SigScript { prefix_pushes, .. } => assert_eq!(prefix_pushes.len(), 1),
            other => panic!("unexpected template: {other:?}"),
        }

        let drop_only = Script {
            instrs: vec![ScriptInstr::Op(Opcode::Drop)],
        };
        assert_eq!(
            match_template(&drop_only, TemplateKind::Claiming),
            Template::NonStandard
        );
        assert_eq!(
            match_template(&drop_only, TemplateKind::Condition),
            Template::NonStandard
        );
    }

    #[test]
    fn standard_spend_executes_true() {
        let pubkey = vec![4u8; 65];
        let cond = p2pkh_condition(&hash160(&pubkey));
        let sig = sig_script(&[1; 71], &pubkey);
        assert_eq!(execute(&sig, &cond, &Accept), Ok(true));
        assert_eq!(execute(&sig, &cond, &Reject), Ok(false));
    }

    #[test]
    fn mismatched_pubkey_hash_aborts_false() {
        let pubkey = vec![4u8; 65];
        let cond = p2pkh_condition(&[0xEE; 20]);
        let sig = sig_script(&[1; 71], &pubkey);
        assert_eq!(execute(&sig, &cond, &Accept), Ok(false));
    }

    #[test]
    fn extra_leading_push_still_validates() {
        let pubkey = vec![4u8; 65];
        let cond = p2pkh_condition(&hash160(&pubkey));
        let mut sig = sig_script(&[1; 71], &pubkey);
        sig.instrs
            .insert(0, ScriptInstr::Push(PushOp::minimal(vec![0x51])));
        assert_eq!(execute(&sig, &cond, &Accept), Ok(true));
    }

    #[test]
    fn execution_agrees_across_minimality() {
        let pubkey = vec![4u8; 65];
        let cond = p2pkh_condition(&hash160(&pubkey));
        let sig = Script::parse(&pushdata2_sig_script_bytes()).unwrap();
        let lhs = execute(&sig, &cond, &Accept);
        let rhs = execute(&sig.minimalize(), &cond, &Accept);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn unsupported_opcode_and_underflow_are_errors() {
        let bad = Script {
            instrs: vec![ScriptInstr::Op(Opcode::Other(0x51))],
        };
        assert_eq!(
            execute(&bad, &Script::default(), &Accept),
            Err(ExecError::UnsupportedOpcode(0x51))
        );
        let dup = Script {
            instrs: vec![ScriptInstr::Op(Opcode::Dup)],
        };
        assert_eq!(
            execute(&dup, &Script::default(), &Accept),
            Err(ExecError::StackUnderflow)
        );
    }

    #[test]
    fn instruction_budget_is_enforced() {
        let long = Script {
            instrs: vec![ScriptInstr::Push(PushOp::minimal(vec![1])); 202],
        };
        assert_eq!(
            execute(&long, &Script::default(), &Accept),
            Err(ExecError::TooManyInstructions)
        );
    }

    fn arb_push() -> impl Strategy<Value = PushOp> {
        (0usize..300, any::<u8>(), 0u8..4).prop_map(|(len, fill, flavor)| {
            let payload = vec![fill; len];
            let minimal = minimal_encoding_for(len);
            let encoding = match (flavor, minimal) {
                (0, e) => e,
                (1, PushEncoding::Direct) => PushEncoding::PushData1,
                (1, _) => PushEncoding::PushData2,
                (2, PushEncoding::PushData2) => PushEncoding::PushData4,
                (2, _) => PushEncoding::PushData2,
                (_, _) => PushEncoding::PushData4,
            };
            PushOp { encoding, payload }
        })
    }

    fn arb_script() -> impl Strategy<Value = Script> {
        let instr = prop_oneof![
            arb_push().prop_map(ScriptInstr::Push),
            (0x4Fu8..=0xFF).prop_map(|b| ScriptInstr::Op(Opcode::from_byte(b))),
        ];
        proptest::collection::vec(instr, 0..12).prop_map(|instrs| Script { instrs })
    }

    proptest! {
        #[test]
        fn encode_parse_round_trip(script in arb_script()) {
            let bytes = script.encode();
            prop_assert_eq!(Script::parse(&bytes).unwrap(), script);
        }

        #[test]
        fn byte_faithful_parse(bytes in proptest::collection::vec(any::<u8>(), 0..128)) {
            if let Ok(script) = Script::parse(&bytes) {
                prop_assert_eq!(script.encode(), bytes);
            }
        }

        #[test]
        fn minimalize_properties(script in arb_script()) {
            let once = script.minimalize();
            prop_assert_eq!(once.minimalize(), once.clone());
            prop_assert!(once.instrs.iter().all(|i| i.as_push().is_none_or(|p| p.is_minimal())));
            prop_assert_eq!(script.push_payloads(), once.push_payloads());
        }
    }
}
