//! Toolkit for detecting, classifying, and quantifying Bitcoin
//! transaction-malleability attacks on synthetic transaction corpora.
//!
//! The crate is organized around the attack lifecycle:
//!
//! * [`tx`] — wire-format transaction codec and the double-SHA256 txid;
//! * [`script`] — claiming-script parsing, push-encoding minimality,
//!   standard templates, and the stack-machine interpreter;
//! * [`sigcrypto`] — DER signature codec, ECDSA s-negation, sighash
//!   computation, and the pluggable crypto provider;
//! * [`mutation`] — generation of malleated transaction variants and
//!   classification of observed conflicting pairs;
//! * [`conflict`] — malleability-invariant normalized keys and conflict-set
//!   construction with attack outcomes;
//! * [`analytics`] — period segmentation, per-period totals, hourly attack
//!   rates, and cumulative series;
//! * [`netsim`] — discrete-event simulation of the propagation race between
//!   an original and a malleated transaction;
//! * [`corpus`] — JSON-lines corpus I/O and the deterministic fixture
//!   generator with its ground-truth manifest.

pub mod analytics;
pub mod conflict;
pub mod corpus;
pub mod hashes;
pub mod mutation;
pub mod netsim;
pub mod script;
pub mod sigcrypto;
pub mod tx;

#[cfg(any(test, feature = "testutil"))]
pub mod testutil;
