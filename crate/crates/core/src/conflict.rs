//! Malleability-invariant normalized keys, conflict-set construction, and
//! attack outcomes.
//!
//! Removing every claiming script from a transaction leaves exactly the
//! signed content, so all malleated variants of one transaction normalize to
//! the same key. Grouping observed transactions by that key yields the
//! conflict sets this toolkit analyzes.

use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashes::{double_sha256, Hash256};
use crate::mutation::{classify_pair, PairClassification};
use crate::tx::{serialize_tx, OutPoint, Transaction};

/// Double-SHA256 of a transaction serialized with every claiming script
/// emptied. Equal for any two transactions differing only in their claiming
/// scripts; sequence numbers, outputs, and locktime all stay inside the key
/// because they are signed data.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormalizedKey(pub Hash256);

impl fmt::Display for NormalizedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for NormalizedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn normalized_key(tx: &Transaction) -> NormalizedKey {
    let mut stripped = tx.clone();
    for input in &mut stripped.inputs {
        input.script_sig.clear();
    }
    NormalizedKey(double_sha256(&serialize_tx(&stripped)))
}

/// One observed transaction: when it was first seen on the network and, if
/// ever, the block height that confirmed it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CorpusRecord {
    pub tx: Transaction,
    pub first_seen: DateTime<Utc>,
    pub confirmed_in: Option<u64>,
}

/// Classification of a whole conflict set.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "set_type", rename_all = "snake_case")]
pub enum SetClassification {
    /// Two members; how they relate.
    Pair(PairClassification),
    /// More than two members — the signature of an automated system
    /// broadcasting and re-signing repeatedly.
    MultiBroadcast,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// A non-original member was confirmed.
    SuccessfulAttack,
    /// The inferred original was confirmed.
    FailedAttack,
    /// No member was ever confirmed.
    Unconfirmed,
    /// Confirmed, but not attributable as an attack (genuine re-signs,
    /// multi-broadcasts, and unclassifiable pairs).
    NotAnAttack,
}

/// Transactions sharing one normalized key.
#[derive(Clone, Debug)]
pub struct ConflictSet {
    pub key: NormalizedKey,
    /// At least two, ordered by first_seen (txid as tie-break).
    pub members: Vec<CorpusRecord>,
    /// Output-value sum, identical across members by construction.
    pub value_satoshi: u64,
    /// Index into `members` of the confirmed one, if any.
    pub confirmed_member: Option<usize>,
    pub classification: SetClassification,
    pub outcome: Outcome,
}

impl ConflictSet {
    /// First broadcast of the set — the attack timestamp.
    pub fn earliest(&self) -> DateTime<Utc> {
        self.members[0].first_seen
    }

    /// True iff the set is classified as a malleability attack.
    pub fn is_attack(&self) -> bool {
        matches!(
            self.classification,
            SetClassification::Pair(PairClassification::EncodingMutation { .. })
        )
    }

    /// Index into `members` of the inferred original, where one exists.
    pub fn original_member(&self) -> Option<usize> {
        match self.classification {
            SetClassification::Pair(PairClassification::EncodingMutation {
                original_index,
                ..
            }) => Some(original_index),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConflictError {
    #[error("duplicate txid {0} in corpus")]
    DuplicateTxid(Hash256),
    #[error("members of conflict set {key} disagree on output value")]
    ValueMismatch { key: NormalizedKey },
    #[error("conflict set {key} has more than one confirmed member")]
    MultipleConfirmed { key: NormalizedKey },
}

/// Groups a corpus into conflict sets: one set per normalized key shared by
/// at least two transactions, classified and with its outcome determined.
/// Sets are ordered by earliest first_seen, then key; the result is
/// independent of the input order.
pub fn build_conflict_sets(
    records: impl IntoIterator<Item = CorpusRecord>,
) -> Result<Vec<ConflictSet>, ConflictError> {
    let mut seen_txids: HashMap<Hash256, ()> = HashMap::new();
    let mut groups: HashMap<NormalizedKey, Vec<CorpusRecord>> = HashMap::new();
    for record in records {
        let txid = record.tx.txid();
        if seen_txids.insert(txid, ()).is_some() {
            return Err(ConflictError::DuplicateTxid(txid));
        }
        groups
            .entry(normalized_key(&record.tx))
            .or_default()
            .push(record);
    }

    let mut sets = Vec::new();
    for (key, mut members) in groups {
        if members.len() < 2 {
            continue;
        }
        members.sort_by_key(|m| (m.first_seen, m.tx.txid()));

        let value_satoshi = members[0].tx.output_value();
        if members.iter().any(|m| m.tx.output_value() != value_satoshi) {
            return Err(ConflictError::ValueMismatch { key });
        }

        let confirmed: Vec<usize> = members
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.confirmed_in.map(|_| i))
            .collect();
        if confirmed.len() > 1 {
            return Err(ConflictError::MultipleConfirmed { key });
        }
        let confirmed_member = confirmed.first().copied();

        let classification = if members.len() == 2 {
            SetClassification::Pair(
                classify_pair(&members[0].tx, &members[1].tx)
                    .unwrap_or(PairClassification::Unknown),
            )
        } else {
            SetClassification::MultiBroadcast
        };

        let mut set = ConflictSet {
            key,
            members,
            value_satoshi,
            confirmed_member,
            classification,
            outcome: Outcome::Unconfirmed,
        };
        set.outcome = determine_outcome(&set);
        sets.push(set);
    }

    sets.sort_by_key(|s| (s.earliest(), s.key));
    Ok(sets)
}

/// Outcome rules, in order: no confirmation → Unconfirmed; a confirmed
/// re-sign, multi-broadcast, or unclassifiable set → NotAnAttack; otherwise
/// the confirmed member decides — original confirmed means the attack
/// failed, anything else means it succeeded.
pub fn determine_outcome(set: &ConflictSet) -> Outcome {
    let Some(confirmed) = set.confirmed_member else {
        return Outcome::Unconfirmed;
    };
    match set.original_member() {
        None => Outcome::NotAnAttack,
        Some(original) if original == confirmed => Outcome::FailedAttack,
        Some(_) => Outcome::SuccessfulAttack,
    }
}

/// Testing oracle: groups transactions by shared claimed outpoints
/// (transitive closure), the generic double-spend detection the key-based
/// pipeline deliberately narrows. Quadratic; intended for corpora of at most
/// ~10,000 records. Singleton groups are included.
pub fn brute_force_conflicts(records: &[CorpusRecord]) -> Vec<Vec<Hash256>> {
    let n = records.len();
    let outpoints: Vec<Vec<OutPoint>> = records
        .iter()
        .map(|r| r.tx.inputs.iter().map(|i| i.previous).collect())
        .collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    for i in 0..n {
        for j in i + 1..n {
            let conflict = outpoints[i].iter().any(|o| outpoints[j].contains(o));
            if conflict {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }

    let mut groups: HashMap<usize, Vec<Hash256>> = HashMap::new();
    for (i, record) in records.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(record.tx.txid());
    }
    let mut out: Vec<Vec<Hash256>> = groups
        .into_values()
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mutation::{mutate, MutationContext, MutationKind};
    use crate::sigcrypto::Secp256k1Provider;
    use crate::testutil::fixtures::{random_nonce, random_p2pkh};
    use crate::tx::{TxInput, TxOutput};

    fn ts(secs: i64) -> DateTime<Utc> {
        DateTime::<Utc>::from_timestamp(1_357_000_000 + secs, 0).unwrap()
    }

    fn record(tx: Transaction, secs: i64, confirmed_in: Option<u64>) -> CorpusRecord {
        CorpusRecord {
            tx,
            first_seen: ts(secs),
            confirmed_in,
        }
    }

    #[test]
    fn key_is_invariant_under_mutation_and_sensitive_to_signed_fields() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let fx = random_p2pkh(&mut rng, &provider);
        let ctx = MutationContext::bare(&provider);

        let mutated = mutate(&fx.tx, MutationKind::NonMinimalPush, 0, &ctx).unwrap();
        assert_eq!(normalized_key(&fx.tx), normalized_key(&mutated));

        // Any signed field changes the key.
        let base = normalized_key(&fx.tx);
        let mut v = fx.tx.clone();
        v.version = 2;
        assert_ne!(normalized_key(&v), base);
        let mut o = fx.tx.clone();
        o.outputs[0].value += 1;
        assert_ne!(normalized_key(&o), base);
        let mut s = fx.tx.clone();
        s.inputs[0].sequence = 0;
        assert_ne!(normalized_key(&s), base);
        let mut l = fx.tx.clone();
        l.locktime = 99;
        assert_ne!(normalized_key(&l), base);
        let mut p = fx.tx.clone();
        p.inputs[0].previous.index += 1;
        assert_ne!(normalized_key(&p), base);
    }

    #[test]
    fn empty_script_sig_key_equals_txid() {
        let tx = Transaction {
            version: 1,
            inputs: vec![TxInput {
                previous: OutPoint {
                    txid: Hash256([3u8; 32]),
                    index: 0,
                },
                script_sig: vec![],
                sequence: 0,
            }],
            outputs: vec![TxOutput {
                value: 1,
                script_pubkey: vec![],
            }],
            locktime: 0,
        };
        assert_eq!(normalized_key(&tx).0, tx.txid());
    }

    #[test]
    fn unrelated_transactions_form_no_sets() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let records: Vec<CorpusRecord> = (0..3)
            .map(|i| record(random_p2pkh(&mut rng, &provider).tx, i, None))
            .collect();
        assert!(build_conflict_sets(records).unwrap().is_empty());
    }

    #[test]
    fn confirmed_mutation_is_a_successful_attack() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let fx = random_p2pkh(&mut rng, &provider);
        let ctx = MutationContext::bare(&provider);
        let mutated = mutate(&fx.tx, MutationKind::NonMinimalPush, 0, &ctx).unwrap();

        let sets = build_conflict_sets(vec![
            record(fx.tx.clone(), 0, None),
            record(mutated.clone(), 30, Some(280_000)),
        ])
        .unwrap();
        assert_eq!(sets.len(), 1);
        let set = &sets[0];
        assert_eq!(set.members.len(), 2);
        assert_eq!(set.outcome, Outcome::SuccessfulAttack);
        assert!(set.is_attack());
        assert_eq!(set.original_member(), Some(0));
        assert_eq!(set.value_satoshi, fx.tx.output_value());

        // Confirming the original instead fails the attack.
        let sets = build_conflict_sets(vec![
            record(fx.tx.clone(), 0, Some(280_000)),
            record(mutated.clone(), 30, None),
        ])
        .unwrap();
        assert_eq!(sets[0].outcome, Outcome::FailedAttack);

        // No confirmation at all.
        let sets = build_conflict_sets(vec![
            record(fx.tx.clone(), 0, None),
            record(mutated, 30, None),
        ])
        .unwrap();
        assert_eq!(sets[0].outcome, Outcome::Unconfirmed);
    }

    #[test]
    fn multi_broadcast_sets_are_not_attacks() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let fx = random_p2pkh(&mut rng, &provider);
        let mut records = vec![record(fx.tx.clone(), 0, None)];
        for i in 1..4 {
            let ctx = MutationContext {
                provider: &provider,
                keypair: Some(&fx.keypair),
                nonce: Some(random_nonce(&mut rng)),
                referenced_script_pubkey: Some(&fx.script_pubkey),
            };
            let copy = mutate(&fx.tx, MutationKind::ReSign, 0, &ctx).unwrap();
            records.push(record(copy, i * 10, None));
        }

        let sets = build_conflict_sets(records.clone()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].classification, SetClassification::MultiBroadcast);
        assert_eq!(sets[0].outcome, Outcome::Unconfirmed);

        // Confirmed multi-broadcast: still not an attack.
        records[2].confirmed_in = Some(280_001);
        let sets = build_conflict_sets(records).unwrap();
        assert_eq!(sets[0].outcome, Outcome::NotAnAttack);
    }

    #[test]
    fn genuine_re_sign_with_confirmation_is_not_an_attack() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let fx = random_p2pkh(&mut rng, &provider);
        let ctx = MutationContext {
            provider: &provider,
            keypair: Some(&fx.keypair),
            nonce: Some(random_nonce(&mut rng)),
            referenced_script_pubkey: Some(&fx.script_pubkey),
        };
        let resigned = mutate(&fx.tx, MutationKind::ReSign, 0, &ctx).unwrap();
        let sets = build_conflict_sets(vec![
            record(fx.tx, 0, None),
            record(resigned, 5, Some(280_000)),
        ])
        .unwrap();
        assert_eq!(
            sets[0].classification,
            SetClassification::Pair(PairClassification::GenuineReSign)
        );
        assert_eq!(sets[0].outcome, Outcome::NotAnAttack);
    }

    #[test]
    fn duplicate_txids_are_rejected() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let fx = random_p2pkh(&mut rng, &provider);
        let err = build_conflict_sets(vec![
            record(fx.tx.clone(), 0, None),
            record(fx.tx.clone(), 10, None),
        ])
        .unwrap_err();
        assert_eq!(err, ConflictError::DuplicateTxid(fx.tx.txid()));
    }

    #[test]
    fn members_sort_by_first_seen_and_sets_by_earliest() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let ctx = MutationContext::bare(&provider);

        let fx1 = random_p2pkh(&mut rng, &provider);
        let m1 = mutate(&fx1.tx, MutationKind::ExtraPush, 0, &ctx).unwrap();
        let fx2 = random_p2pkh(&mut rng, &provider);
        let m2 = mutate(&fx2.tx, MutationKind::LaxDerPadding, 0, &ctx).unwrap();

        // Feed records shuffled; builder output must not depend on order.
        let records = vec![
            record(m2, 100, None),
            record(fx1.tx.clone(), 0, None),
            record(fx2.tx.clone(), 90, None),
            record(m1, 10, None),
        ];
        let sets = build_conflict_sets(records.clone()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].members[0].tx.txid(), fx1.tx.txid());
        assert_eq!(sets[1].members[0].tx.txid(), fx2.tx.txid());

        let mut reversed = records;
        reversed.reverse();
        let again = build_conflict_sets(reversed).unwrap();
        assert_eq!(again.len(), 2);
        assert_eq!(again[0].key, sets[0].key);
        assert_eq!(again[1].key, sets[1].key);
    }

    #[test]
    fn brute_force_oracle_agrees_on_malleability_pairs() {
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let fx = random_p2pkh(&mut rng, &provider);
        let ctx = MutationContext::bare(&provider);
        let mutated = mutate(&fx.tx, MutationKind::NonMinimalPush, 0, &ctx).unwrap();
        let lone = random_p2pkh(&mut rng, &provider);

        let records = vec![
            record(fx.tx.clone(), 0, None),
            record(mutated.clone(), 10, None),
            record(lone.tx.clone(), 20, None),
        ];
        let groups = brute_force_conflicts(&records);
        assert_eq!(groups.len(), 2);
        let pair: Vec<Hash256> = {
            let mut v = vec![fx.tx.txid(), mutated.txid()];
            v.sort();
            v
        };
        assert!(groups.contains(&pair));
        assert!(groups.contains(&vec![lone.tx.txid()]));

        // The key-based set is a subset of exactly one brute-force group.
        let sets = build_conflict_sets(records).unwrap();
        let member_txids: Vec<Hash256> = {
            let mut v: Vec<Hash256> = sets[0].members.iter().map(|m| m.tx.txid()).collect();
            v.sort();
            v
        };
        assert_eq!(member_txids, pair);
    }

    #[test]
    fn key_sensitivity_under_random_single_field_perturbation() {
        use proptest::prelude::*;
        use proptest::test_runner::TestRunner;

        let provider = Secp256k1Provider::new();
        let mut seed_rng = ChaCha8Rng::seed_from_u64(49);
        let fx = random_p2pkh(&mut seed_rng, &provider);
        let base = normalized_key(&fx.tx);

        let mut runner = TestRunner::default();
        runner
            .run(&(0usize..5, 1u32..u32::MAX), |(field, delta)| {
                let mut tx = fx.tx.clone();
                match field {
                    0 => tx.version = tx.version.wrapping_add(delta),
                    1 => {
                        tx.inputs[0].previous.index =
                            tx.inputs[0].previous.index.wrapping_add(delta)
                    }
                    2 => tx.inputs[0].sequence = tx.inputs[0].sequence.wrapping_add(delta),
                    3 => tx.outputs[0].value += u64::from(delta),
                    _ => tx.locktime = tx.locktime.wrapping_add(delta),
                }
                prop_assert_ne!(normalized_key(&tx), base);
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn classical_double_spend_is_outside_the_key_pipeline() {
        // Same outpoint, different outputs: conflicting but differently keyed.
        let provider = Secp256k1Provider::new();
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let fx = random_p2pkh(&mut rng, &provider);
        let mut other = fx.tx.clone();
        other.outputs[0].value -= 1;

        let records = vec![record(fx.tx, 0, None), record(other, 10, None)];
        assert_eq!(brute_force_conflicts(&records).len(), 1);
        assert!(build_conflict_sets(records).unwrap().is_empty());
    }
}
