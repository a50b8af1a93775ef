//! Bit-exact serialization, deserialization, and hashing of transactions.
//!
//! Wire layout (all integers little-endian):
//!
//! ```text
//! version(4) ‖ varint(#inputs) ‖ inputs ‖ varint(#outputs) ‖ outputs ‖ locktime(4)
//! input:  txid(32, raw byte order) ‖ index(4) ‖ varint(len) ‖ script_sig ‖ sequence(4)
//! output: value(8) ‖ varint(len) ‖ script_pubkey
//! ```
//!
//! This is the pre-segwit format; there is no witness data.

use std::fmt;

use thiserror::Error;

use crate::hashes::{double_sha256, Hash256};

/// Claiming scripts and claiming conditions larger than this are rejected.
pub const MAX_SCRIPT_LEN: usize = 10_000;
/// Upper bound on the number of inputs or outputs in one transaction.
pub const MAX_FIELD_COUNT: u64 = 100_000;
/// 21 million bitcoin in satoshi; no single output may carry more.
pub const MAX_VALUE_SATOSHI: u64 = 2_100_000_000_000_000;

/// Reference to an output of a previous transaction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutPoint {
    pub txid: Hash256,
    pub index: u32,
}

impl fmt::Debug for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.txid, self.index)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxInput {
    pub previous: OutPoint,
    /// Claiming script, kept unparsed at this layer.
    pub script_sig: Vec<u8>,
    pub sequence: u32,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxOutput {
    /// Value in satoshi (1 bitcoin = 10^8 satoshi).
    pub value: u64,
    /// Claiming condition.
    pub script_pubkey: Vec<u8>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub version: u32,
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    pub locktime: u32,
}

impl Transaction {
    /// Double-SHA256 of the full serialization, script_sig bytes included.
    pub fn txid(&self) -> Hash256 {
        double_sha256(&serialize_tx(self))
    }

    /// Sum of all output values in satoshi.
    pub fn output_value(&self) -> u64 {
        self.outputs.iter().map(|o| o.value).sum()
    }
}

/// Which bound a rejected field ran into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    ScriptLen,
    InputCount,
    OutputCount,
    OutputValue,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Limit::ScriptLen => "script length",
            Limit::InputCount => "input count",
            Limit::OutputCount => "output count",
            Limit::OutputValue => "output value",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("input truncated at offset {offset}")]
    TruncatedInput { offset: usize },
    #[error("trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("non-minimal varint at offset {offset}")]
    NonMinimalVarInt { offset: usize },
    #[error("{what} limit exceeded at offset {offset}")]
    LimitExceeded { offset: usize, what: Limit },
}

pub fn serialize_tx(tx: &Transaction) -> Vec<u8> {
    let mut out = Vec::with_capacity(estimated_size(tx));
    out.extend_from_slice(&tx.version.to_le_bytes());
    write_varint(&mut out, tx.inputs.len() as u64);
    for input in &tx.inputs {
        out.extend_from_slice(input.previous.txid.as_bytes());
        out.extend_from_slice(&input.previous.index.to_le_bytes());
        write_varint(&mut out, input.script_sig.len() as u64);
        out.extend_from_slice(&input.script_sig);
        out.extend_from_slice(&input.sequence.to_le_bytes());
    }
    write_varint(&mut out, tx.outputs.len() as u64);
    for output in &tx.outputs {
        out.extend_from_slice(&output.value.to_le_bytes());
        write_varint(&mut out, output.script_pubkey.len() as u64);
        out.extend_from_slice(&output.script_pubkey);
    }
    out.extend_from_slice(&tx.locktime.to_le_bytes());
    out
}

fn estimated_size(tx: &Transaction) -> usize {
    10 + tx
        .inputs
        .iter()
        .map(|i| 41 + i.script_sig.len() + 3)
        .sum::<usize>()
        + tx.outputs
            .iter()
            .map(|o| 9 + o.script_pubkey.len() + 3)
            .sum::<usize>()
}

/// Parses exactly the wire layout and consumes the entire input.
pub fn deserialize_tx(bytes: &[u8]) -> Result<Transaction, CodecError> {
    let mut reader = Reader::new(bytes);
    let version = reader.read_u32()?;

    let input_count = reader.read_count(Limit::InputCount)?;
    let mut inputs = Vec::with_capacity(input_count as usize);
    for _ in 0..input_count {
        let txid = Hash256(reader.read_array::<32>()?);
        let index = reader.read_u32()?;
        let script_sig = reader.read_script()?;
        let sequence = reader.read_u32()?;
        inputs.push(TxInput {
            previous: OutPoint { txid, index },
            script_sig,
            sequence,
        });
    }

    let output_count = reader.read_count(Limit::OutputCount)?;
    let mut outputs = Vec::with_capacity(output_count as usize);
    for _ in 0..output_count {
        let value_offset = reader.pos;
        let value = reader.read_u64()?;
        if value > MAX_VALUE_SATOSHI {
            return Err(CodecError::LimitExceeded {
                offset: value_offset,
                what: Limit::OutputValue,
            });
        }
        let script_pubkey = reader.read_script()?;
        outputs.push(TxOutput {
            value,
            script_pubkey,
        });
    }

    let locktime = reader.read_u32()?;
    reader.expect_end()?;

    Ok(Transaction {
        version,
        inputs,
        outputs,
        locktime,
    })
}

/// Minimal compact-size encoding of `n`.
pub fn encode_varint(n: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(9);
    write_varint(&mut out, n);
    out
}

pub fn write_varint(out: &mut Vec<u8>, n: u64) {
    if n < 0xFD {
        out.push(n as u8);
    } else if n <= 0xFFFF {
        out.push(0xFD);
        out.extend_from_slice(&(n as u16).to_le_bytes());
    } else if n <= 0xFFFF_FFFF {
        out.push(0xFE);
        out.extend_from_slice(&(n as u32).to_le_bytes());
    } else {
        out.push(0xFF);
        out.extend_from_slice(&n.to_le_bytes());
    }
}

/// Parses a compact-size integer from the front of `bytes`, rejecting
/// non-minimal encodings. Returns the value and the number of bytes consumed.
pub fn parse_varint(bytes: &[u8]) -> Result<(u64, usize), CodecError> {
    let mut reader = Reader::new(bytes);
    let n = reader.read_varint()?;
    Ok((n, reader.pos))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.bytes.len() - self.pos < n {
            return Err(CodecError::TruncatedInput { offset: self.pos });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn read_u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.read_array::<4>()?))
    }

    fn read_u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.read_array::<8>()?))
    }

    fn read_varint(&mut self) -> Result<u64, CodecError> {
        let start = self.pos;
        let tag = self.take(1)?[0];
        let value = match tag {
            0xFD => u16::from_le_bytes(self.read_array::<2>()?) as u64,
            0xFE => u32::from_le_bytes(self.read_array::<4>()?) as u64,
            0xFF => u64::from_le_bytes(self.read_array::<8>()?),
            b => return Ok(b as u64),
        };
        let minimal = match tag {
            0xFD => (0xFD..=0xFFFF).contains(&value),
            0xFE => value > 0xFFFF && value <= 0xFFFF_FFFF,
            _ => value > 0xFFFF_FFFF,
        };
        if !minimal {
            return Err(CodecError::NonMinimalVarInt { offset: start });
        }
        Ok(value)
    }

    fn read_count(&mut self, what: Limit) -> Result<u64, CodecError> {
        let start = self.pos;
        let n = self.read_varint()?;
        if n == 0 || n > MAX_FIELD_COUNT {
            return Err(CodecError::LimitExceeded {
                offset: start,
                what,
            });
        }
        Ok(n)
    }

    fn read_script(&mut self) -> Result<Vec<u8>, CodecError> {
        let start = self.pos;
        let len = self.read_varint()?;
        if len as usize > MAX_SCRIPT_LEN {
            return Err(CodecError::LimitExceeded {
                offset: start,
                what: Limit::ScriptLen,
            });
        }
        Ok(self.take(len as usize)?.to_vec())
    }

    fn expect_end(&self) -> Result<(), CodecError> {
        if self.pos != self.bytes.len() {
            return Err(CodecError::TrailingBytes { offset: self.pos });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::hashes::sha256;

    fn minimal_tx() -> Transaction {
        Transaction {
            version: 1,
            inputs: vec![TxInput {
                previous: OutPoint {
                    txid: Hash256([0u8; 32]),
                    index: 0,
                },
                script_sig: vec![],
                sequence: 0xFFFF_FFFF,
            }],
            outputs: vec![TxOutput {
                value: 0,
                script_pubkey: vec![],
            }],
            locktime: 0,
        }
    }

    #[test]
    fn minimal_tx_serializes_to_60_bytes() {
        let bytes = serialize_tx(&minimal_tx());
        assert_eq!(bytes.len(), 60);
        assert_eq!(deserialize_tx(&bytes).unwrap(), minimal_tx());
    }

    #[test]
    fn empty_input_is_truncated_at_offset_zero() {
        assert_eq!(
            deserialize_tx(&[]),
            Err(CodecError::TruncatedInput { offset: 0 })
        );
    }

    #[test]
    fn trailing_byte_is_rejected_at_final_offset() {
        let mut bytes = serialize_tx(&minimal_tx());
        bytes.push(0xAA);
        assert_eq!(
            deserialize_tx(&bytes),
            Err(CodecError::TrailingBytes { offset: 60 })
        );
    }

    #[test]
    fn zero_counts_are_rejected() {
        // version ‖ varint(0) for inputs
        let mut bytes = vec![1, 0, 0, 0];
        bytes.push(0);
        assert_eq!(
            deserialize_tx(&bytes),
            Err(CodecError::LimitExceeded {
                offset: 4,
                what: Limit::InputCount
            })
        );
    }

    #[test]
    fn oversized_counts_are_rejected_before_allocation() {
        let mut bytes = vec![1, 0, 0, 0];
        write_varint(&mut bytes, MAX_FIELD_COUNT + 1);
        assert_eq!(
            deserialize_tx(&bytes),
            Err(CodecError::LimitExceeded {
                offset: 4,
                what: Limit::InputCount
            })
        );
    }

    #[test]
    fn oversized_script_is_rejected() {
        let mut tx = minimal_tx();
        tx.inputs[0].script_sig = vec![0; MAX_SCRIPT_LEN + 1];
        let bytes = serialize_tx(&tx);
        assert_eq!(
            deserialize_tx(&bytes),
            Err(CodecError::LimitExceeded {
                offset: 41,
                what: Limit::ScriptLen
            })
        );
    }

    #[test]
    fn varint_boundary_table() {
        assert_eq!(encode_varint(0), vec![0x00]);
        assert_eq!(encode_varint(252), vec![0xFC]);
        assert_eq!(encode_varint(253), vec![0xFD, 0xFD, 0x00]);
        assert_eq!(encode_varint(0xFFFF), vec![0xFD, 0xFF, 0xFF]);
        assert_eq!(encode_varint(0x1_0000), vec![0xFE, 0x00, 0x00, 0x01, 0x00]);
        assert_eq!(
            encode_varint(u64::MAX),
            vec![0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF]
        );
    }

    #[test]
    fn varint_rejects_non_minimal() {
        assert_eq!(
            parse_varint(&[0xFD, 0x10, 0x00]),
            Err(CodecError::NonMinimalVarInt { offset: 0 })
        );
        assert_eq!(
            parse_varint(&[0xFE, 0xFF, 0xFF, 0x00, 0x00]),
            Err(CodecError::NonMinimalVarInt { offset: 0 })
        );
        assert_eq!(parse_varint(&[0xFD, 0xFD, 0x00]), Ok((253, 3)));
    }

    #[test]
    fn varint_truncation_reports_offset() {
        assert_eq!(
            parse_varint(&[0xFD, 0x01]),
            Err(CodecError::TruncatedInput { offset: 1 })
        );
    }

    #[test]
    fn txid_changes_with_any_script_sig_byte() {
        let mut tx = minimal_tx();
        tx.inputs[0].script_sig = vec![1, 2, 3];
        let a = tx.txid();
        tx.inputs[0].script_sig[1] = 9;
        assert_ne!(a, tx.txid());
    }

    #[test]
    fn txid_matches_independent_double_sha256() {
        let tx = minimal_tx();
        let bytes = serialize_tx(&tx);
        let oracle = Hash256(sha256(&sha256(&bytes)));
        assert_eq!(tx.txid(), oracle);
    }

    pub(crate) fn arb_transaction() -> impl Strategy<Value = Transaction> {
        let input = (
            proptest::array::uniform32(any::<u8>()),
            any::<u32>(),
            proptest::collection::vec(any::<u8>(), 0..64),
            any::<u32>(),
        )
            .prop_map(|(txid, index, script_sig, sequence)| TxInput {
                previous: OutPoint {
                    txid: Hash256(txid),
                    index,
                },
                script_sig,
                sequence,
            });
        let output = (
            0u64..=MAX_VALUE_SATOSHI,
            proptest::collection::vec(any::<u8>(), 0..64),
        )
            .prop_map(|(value, script_pubkey)| TxOutput {
                value,
                script_pubkey,
            });
        (
            any::<u32>(),
            proptest::collection::vec(input, 1..4),
            proptest::collection::vec(output, 1..4),
            any::<u32>(),
        )
            .prop_map(|(version, inputs, outputs, locktime)| Transaction {
                version,
                inputs,
                outputs,
                locktime,
            })
    }

    proptest! {
        #[test]
        fn round_trip(tx in arb_transaction()) {
            let bytes = serialize_tx(&tx);
            prop_assert_eq!(deserialize_tx(&bytes).unwrap(), tx);
        }

        #[test]
        fn parse_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            // Must return a value or a typed error, never panic or read OOB.
            let _ = deserialize_tx(&bytes);
        }

        #[test]
        fn varint_round_trip(n in any::<u64>()) {
            let bytes = encode_varint(n);
            prop_assert_eq!(parse_varint(&bytes).unwrap(), (n, bytes.len()));
        }
    }
}
