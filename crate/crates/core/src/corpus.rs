//! JSON-lines corpus files and the deterministic fixture generator.
//!
//! A corpus line is `{"hex": ..., "first_seen": ..., "confirmed_in": ...}`;
//! the generator plants conflict sets exactly as described by a [`PlantPlan`]
//! and emits a [`FixtureManifest`] carrying the ground truth — per-set
//! classifications and outcomes, the key table, the funding map, and the
//! aggregate totals the analysis pipeline must recover.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use chrono::{DateTime, Duration, SubsecRound, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::Period;
use crate::conflict::{normalized_key, CorpusRecord, NormalizedKey, Outcome, SetClassification};
use crate::hashes::Hash256;
use crate::mutation::{mutate, MutationContext, MutationKind, PairClassification};
use crate::script::{p2pkh_condition, sig_script};
use crate::sigcrypto::{
    encode_der, is_low_s, negate_s, random_keypair, random_nonce, secp256k1_order, sign_input,
    CryptoProvider, KeyPair, Secp256k1Provider,
};
use crate::tx::{deserialize_tx, serialize_tx, OutPoint, Transaction, TxInput, TxOutput};

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    hex: String,
    first_seen: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confirmed_in: Option<u64>,
}

/// A line that failed to parse, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for CorpusLineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Valid records plus the per-line failures; callers decide whether failures
/// are fatal.
pub struct CorpusReadOutcome {
    pub records: Vec<CorpusRecord>,
    pub errors: Vec<CorpusLineError>,
}

pub fn read_corpus(reader: impl BufRead) -> io::Result<CorpusReadOutcome> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(record) => records.push(record),
            Err(message) => errors.push(CorpusLineError {
                line: number,
                message,
            }),
        }
    }
    Ok(CorpusReadOutcome { records, errors })
}

fn parse_line(line: &str) -> Result<CorpusRecord, String> {
    let parsed: CorpusLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let bytes = hex::decode(&parsed.hex).map_err(|e| format!("bad hex: {e}"))?;
    let tx = deserialize_tx(&bytes).map_err(|e| e.to_string())?;
    Ok(CorpusRecord {
        tx,
        first_seen: parsed.first_seen.trunc_subsecs(0),
        confirmed_in: parsed.confirmed_in,
    })
}

pub fn write_corpus(mut writer: impl Write, records: &[CorpusRecord]) -> io::Result<()> {
    for record in records {
        let line = CorpusLine {
            hex: hex::encode(serialize_tx(&record.tx)),
            first_seen: record.first_seen,
            confirmed_in: record.confirmed_in,
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// What the generator plants for one group of conflict sets.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    EcdsaNegateS,
    LaxDerPadding,
    ExtraPush,
    NonMinimalPush,
    ReSign,
    /// Three or more independently re-signed copies.
    MultiBroadcast,
}

impl PlantKind {
    fn attack_mutation(self) -> Option<MutationKind> {
        match self {
            PlantKind::EcdsaNegateS => Some(MutationKind::EcdsaNegateS),
            PlantKind::LaxDerPadding => Some(MutationKind::LaxDerPadding),
            PlantKind::ExtraPush => Some(MutationKind::ExtraPush),
            PlantKind::NonMinimalPush => Some(MutationKind::NonMinimalPush),
            PlantKind::ReSign | PlantKind::MultiBroadcast => None,
        }
    }

    /// What the pipeline must classify sets of this kind as. The original is
    /// always the earliest member, hence index 0.
    pub fn expected_classification(self) -> SetClassification {
        match self.attack_mutation() {
            Some(kind) => SetClassification::Pair(PairClassification::EncodingMutation {
                kind,
                original_index: 0,
            }),
            None => match self {
                PlantKind::ReSign => SetClassification::Pair(PairClassification::GenuineReSign),
                _ => SetClassification::MultiBroadcast,
            },
        }
    }
}

/// Which member of a planted set the synthetic chain confirms.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfirmSide {
    Original,
    Modified,
    None,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// `count` conflict sets of one kind, spread evenly over a window, summing
/// to exactly `total_value_satoshi`. The first `confirm_modified` sets get
/// their modified member confirmed, the next `confirm_original` their
/// original; the rest stay unconfirmed.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PlantGroup {
    pub kind: PlantKind,
    pub count: u64,
    pub total_value_satoshi: u64,
    pub window: TimeWindow,
    #[serde(default)]
    pub confirm_modified: u64,
    #[serde(default)]
    pub confirm_original: u64,
    /// Members per set; exactly 2 except for multi-broadcasts (≥ 3).
    #[serde(default = "default_cardinality")]
    pub cardinality: u64,
}

fn default_cardinality() -> u64 {
    2
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize, Default)]
pub struct PlantPlan {
    #[serde(default)]
    pub background_txs: u64,
    /// Window for non-conflicting background traffic; defaults to the span
    /// of the planted windows.
    #[serde(default)]
    pub background_window: Option<TimeWindow>,
    pub plants: Vec<PlantGroup>,
}

impl PlantPlan {
    /// Small demonstration plan: one conflict of every implemented kind plus
    /// a multi-broadcast, with some background traffic, all before the
    /// withdrawal freeze.
    pub fn demo() -> PlantPlan {
        let window = |d1: u32, d2: u32| TimeWindow {
            start: chrono::TimeZone::with_ymd_and_hms(&Utc, 2013, 6, d1, 0, 0, 0).unwrap(),
            end: chrono::TimeZone::with_ymd_and_hms(&Utc, 2013, 6, d2, 0, 0, 0).unwrap(),
        };
        let group = |kind, confirm_modified, confirm_original, d1, d2| PlantGroup {
            kind,
            count: 1,
            total_value_satoshi: 250_000_000,
            window: window(d1, d2),
            confirm_modified,
            confirm_original,
            cardinality: if kind == PlantKind::MultiBroadcast {
                3
            } else {
                2
            },
        };
        PlantPlan {
            background_txs: 20,
            background_window: None,
            plants: vec![
                group(PlantKind::NonMinimalPush, 1, 0, 1, 2),
                group(PlantKind::EcdsaNegateS, 0, 1, 3, 4),
                group(PlantKind::LaxDerPadding, 0, 0, 5, 6),
                group(PlantKind::ExtraPush, 1, 0, 7, 8),
                group(PlantKind::ReSign, 0, 1, 9, 10),
                group(PlantKind::MultiBroadcast, 0, 0, 11, 12),
            ],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("infeasible plan: {0}")]
    SpecInfeasible(String),
}

/// One planted conflict set as recorded in the manifest.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PlantedSet {
    pub kind: PlantKind,
    pub expected_classification: SetClassification,
    pub expected_outcome: Outcome,
    pub original_txid: Hash256,
    pub mutated_txids: Vec<Hash256>,
    pub normalized_key: NormalizedKey,
    pub value_satoshi: u64,
    pub first_seen: DateTime<Utc>,
    pub confirmed: ConfirmSide,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct KeyEntry {
    pub index: usize,
    pub privkey: String,
    pub pubkey: String,
    pub address_hash: String,
}

/// Sidecar funding map: the synthetic outpoint each planted transaction
/// claims, and the claiming condition it must satisfy. Signatures are
/// verifiable from this map alone, without a chain.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FundingEntry {
    pub txid: Hash256,
    pub index: u32,
    pub script_pubkey: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ExpectedPeriod {
    pub name: String,
    pub attack_sets: u64,
    pub re_sign_sets: u64,
    pub total_value_satoshi: u64,
    pub successful: u64,
    pub success_value_satoshi: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ExpectedTotals {
    pub corpus_records: u64,
    pub conflict_sets: u64,
    pub attack_sets: u64,
    pub attack_value_satoshi: u64,
    pub per_period: Vec<ExpectedPeriod>,
    pub cumulative_final_count: u64,
    pub cumulative_final_value_satoshi: u64,
}

/// Ground truth for a generated corpus. Regenerating with the same seed and
/// plan reproduces it byte for byte.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub seed: u64,
    pub keys: Vec<KeyEntry>,
    pub funding: Vec<FundingEntry>,
    pub planted: Vec<PlantedSet>,
    pub expected: ExpectedTotals,
}

pub struct GenOutput {
    pub records: Vec<CorpusRecord>,
    pub manifest: FixtureManifest,
}

const KEY_POOL: usize = 16;
const BASE_HEIGHT: u64 = 280_000;

/// Deterministically generates a corpus of valid signed P2PKH transactions
/// with conflicts planted exactly as the plan describes.
pub fn generate_corpus(
    seed: u64,
    plan: &PlantPlan,
    periods: &[Period],
) -> Result<GenOutput, GenError> {
    validate_plan(plan)?;
    let provider = Secp256k1Provider::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let keys: Vec<KeyPair> = (0..KEY_POOL)
        .map(|_| random_keypair(&mut rng, &provider))
        .collect();

    let epoch = plan_epoch(plan);
    let mut records: Vec<CorpusRecord> = Vec::new();
    let mut planted: Vec<PlantedSet> = Vec::new();
    let mut funding: Vec<FundingEntry> = Vec::new();

    let mut set_counter = 0usize;
    for group in &plan.plants {
        let span = (group.window.end - group.window.start).num_seconds();
        for i in 0..group.count {
            let first_seen =
                group.window.start + Duration::seconds(span * i as i64 / group.count as i64);
            let value = per_set_value(group.total_value_satoshi, group.count, i);
            let key = &keys[set_counter % KEY_POOL];
            let recipient = keys[(set_counter + 1) % KEY_POOL].address_hash;
            set_counter += 1;

            let (original, script_pubkey) =
                build_signed_tx(&mut rng, &provider, key, recipient, value);
            funding.push(FundingEntry {
                txid: original.inputs[0].previous.txid,
                index: original.inputs[0].previous.index,
                script_pubkey: hex::encode(&script_pubkey),
            });

            let copies = match group.kind {
                PlantKind::MultiBroadcast => group.cardinality - 1,
                _ => 1,
            };
            let mut copy_txs = Vec::with_capacity(copies as usize);
            for _ in 0..copies {
                let copy = match group.kind.attack_mutation() {
                    Some(kind) => mutate(&original, kind, 0, &MutationContext::bare(&provider)),
                    None => mutate(
                        &original,
                        MutationKind::ReSign,
                        0,
                        &MutationContext {
                            provider: &provider,
                            keypair: Some(key),
                            nonce: Some(random_nonce(&mut rng)),
                            referenced_script_pubkey: Some(&script_pubkey),
                        },
                    ),
                }
                .map_err(|e| GenError::SpecInfeasible(format!("planting failed: {e}")))?;
                copy_txs.push(copy);
            }

            let confirmed = if i < group.confirm_modified {
                ConfirmSide::Modified
            } else if i < group.confirm_modified + group.confirm_original {
                ConfirmSide::Original
            } else {
                ConfirmSide::None
            };

            let original_seen = first_seen;
            let copy_seen: Vec<DateTime<Utc>> = (0..copies)
                .map(|_| first_seen + Duration::seconds(rng.gen_range(1..=120)))
                .collect();

            records.push(CorpusRecord {
                tx: original.clone(),
                first_seen: original_seen,
                confirmed_in: (confirmed == ConfirmSide::Original)
                    .then(|| block_height(epoch, original_seen)),
            });
            for (j, copy) in copy_txs.iter().enumerate() {
                records.push(CorpusRecord {
                    tx: copy.clone(),
                    first_seen: copy_seen[j],
                    confirmed_in: (confirmed == ConfirmSide::Modified && j == 0)
                        .then(|| block_height(epoch, copy_seen[j])),
                });
            }

            let expected_outcome = match (group.kind.attack_mutation(), confirmed) {
                (Some(_), ConfirmSide::Modified) => Outcome::SuccessfulAttack,
                (Some(_), ConfirmSide::Original) => Outcome::FailedAttack,
                (None, ConfirmSide::None) | (Some(_), ConfirmSide::None) => Outcome::Unconfirmed,
                (None, _) => Outcome::NotAnAttack,
            };
            planted.push(PlantedSet {
                kind: group.kind,
                expected_classification: group.kind.expected_classification(),
                expected_outcome,
                original_txid: original.txid(),
                mutated_txids: copy_txs.iter().map(|t| t.txid()).collect(),
                normalized_key: normalized_key(&original),
                value_satoshi: value,
                first_seen: original_seen,
                confirmed,
            });
        }
    }

    // Non-conflicting background traffic.
    if plan.background_txs > 0 {
        let window = plan
            .background_window
            .or_else(|| plan_window(plan))
            .ok_or_else(|| {
                GenError::SpecInfeasible(
                    "background traffic needs a window or at least one plant".into(),
                )
            })?;
        let span = (window.end - window.start).num_seconds();
        for i in 0..plan.background_txs {
            let first_seen =
                window.start + Duration::seconds(span * i as i64 / plan.background_txs as i64);
            let key = &keys[(set_counter + i as usize) % KEY_POOL];
            let recipient = keys[(set_counter + i as usize + 3) % KEY_POOL].address_hash;
            let (tx, script_pubkey) =
                build_signed_tx(&mut rng, &provider, key, recipient, 100_000 + i);
            funding.push(FundingEntry {
                txid: tx.inputs[0].previous.txid,
                index: tx.inputs[0].previous.index,
                script_pubkey: hex::encode(&script_pubkey),
            });
            records.push(CorpusRecord {
                tx,
                first_seen,
                confirmed_in: Some(block_height(epoch, first_seen)),
            });
        }
    }

    records.sort_by_key(|r| (r.first_seen, r.tx.txid()));
    let mut seen = HashSet::new();
    for record in &records {
        if !seen.insert(record.tx.txid()) {
            return Err(GenError::SpecInfeasible("txid collision in corpus".into()));
        }
    }

    let expected = expected_totals(&planted, periods, records.len() as u64);
    Ok(GenOutput {
        records,
        manifest: FixtureManifest {
            seed,
            keys: keys
                .iter()
                .enumerate()
                .map(|(index, k)| KeyEntry {
                    index,
                    privkey: hex::encode(k.privkey),
                    pubkey: hex::encode(&k.pubkey),
                    address_hash: hex::encode(k.address_hash),
                })
                .collect(),
            funding,
            planted,
            expected,
        },
    })
}

fn validate_plan(plan: &PlantPlan) -> Result<(), GenError> {
    let fail = |msg: String| Err(GenError::SpecInfeasible(msg));
    for (i, group) in plan.plants.iter().enumerate() {
        if group.count == 0 {
            return fail(format!("plant {i}: count must be positive"));
        }
        if group.window.start >= group.window.end {
            return fail(format!("plant {i}: empty time window"));
        }
        if group.confirm_modified + group.confirm_original > group.count {
            return fail(format!("plant {i}: more confirmations than sets"));
        }
        let per_set = group.total_value_satoshi / group.count + 1;
        if per_set > crate::tx::MAX_VALUE_SATOSHI {
            return fail(format!("plant {i}: per-set value exceeds the 21M BTC cap"));
        }
        match group.kind {
            PlantKind::MultiBroadcast if group.cardinality < 3 => {
                return fail(format!("plant {i}: multi-broadcast needs cardinality >= 3"));
            }
            PlantKind::MultiBroadcast => {}
            _ if group.cardinality != 2 => {
                return fail(format!("plant {i}: pair kinds have cardinality exactly 2"));
            }
            _ => {}
        }
    }
    if let Some(w) = plan.background_window {
        if w.start >= w.end {
            return fail("background window is empty".into());
        }
    }
    Ok(())
}

/// Exact integer split: the first `total % count` sets carry one extra
/// satoshi.
fn per_set_value(total: u64, count: u64, index: u64) -> u64 {
    total / count + u64::from(index < total % count)
}

fn plan_window(plan: &PlantPlan) -> Option<TimeWindow> {
    let start = plan.plants.iter().map(|g| g.window.start).min()?;
    let end = plan.plants.iter().map(|g| g.window.end).max()?;
    Some(TimeWindow { start, end })
}

fn plan_epoch(plan: &PlantPlan) -> DateTime<Utc> {
    plan_window(plan)
        .map(|w| w.start)
        .or(plan.background_window.map(|w| w.start))
        .unwrap_or_else(|| chrono::TimeZone::with_ymd_and_hms(&Utc, 2013, 1, 1, 0, 0, 0).unwrap())
}

/// Synthetic block height: one block per ten minutes since the corpus epoch.
fn block_height(epoch: DateTime<Utc>, t: DateTime<Utc>) -> u64 {
    BASE_HEIGHT + ((t - epoch).num_seconds().max(0) as u64) / 600
}

fn build_signed_tx(
    rng: &mut impl Rng,
    provider: &dyn CryptoProvider,
    key: &KeyPair,
    recipient: [u8; 20],
    value: u64,
) -> (Transaction, Vec<u8>) {
    let script_pubkey = p2pkh_condition(&key.address_hash).encode();
    let mut funding_txid = [0u8; 32];
    rng.fill(&mut funding_txid);

    let mut tx = Transaction {
        version: 1,
        inputs: vec![TxInput {
            previous: OutPoint {
                txid: Hash256(funding_txid),
                index: rng.gen_range(0..1000),
            },
            script_sig: Vec::new(),
            sequence: 0xFFFF_FFFF,
        }],
        outputs: vec![TxOutput {
            value,
            script_pubkey: p2pkh_condition(&recipient).encode(),
        }],
        locktime: 0,
    };

    let nonce = random_nonce(rng);
    let mut sig = sign_input(&tx, 0, &script_pubkey, key, provider, &nonce)
        .expect("generated key and nonce are valid");
    // Low-s originals: the inferred-original convention then always points
    // at the actual original.
    if !is_low_s(&sig, secp256k1_order()) {
        sig = negate_s(&sig, secp256k1_order());
    }
    tx.inputs[0].script_sig = sig_script(&encode_der(&sig, true), &key.pubkey).encode();
    (tx, script_pubkey)
}

fn expected_totals(
    planted: &[PlantedSet],
    periods: &[Period],
    corpus_records: u64,
) -> ExpectedTotals {
    let mut per_period: Vec<ExpectedPeriod> = periods
        .iter()
        .map(|p| ExpectedPeriod {
            name: p.name.clone(),
            attack_sets: 0,
            re_sign_sets: 0,
            total_value_satoshi: 0,
            successful: 0,
            success_value_satoshi: 0,
        })
        .collect();

    let mut attack_sets = 0;
    let mut attack_value = 0;
    for set in planted {
        let is_attack = matches!(
            set.expected_classification,
            SetClassification::Pair(PairClassification::EncodingMutation { .. })
        );
        if is_attack {
            attack_sets += 1;
            attack_value += set.value_satoshi;
        }
        let Some(slot) = periods.iter().position(|p| p.contains(set.first_seen)) else {
            continue;
        };
        let entry = &mut per_period[slot];
        if is_attack {
            entry.attack_sets += 1;
            entry.total_value_satoshi += set.value_satoshi;
            if set.expected_outcome == Outcome::SuccessfulAttack {
                entry.successful += 1;
                entry.success_value_satoshi += set.value_satoshi;
            }
        } else {
            entry.re_sign_sets += 1;
        }
    }

    ExpectedTotals {
        corpus_records,
        conflict_sets: planted.len() as u64,
        attack_sets,
        attack_value_satoshi: attack_value,
        per_period,
        cumulative_final_count: attack_sets,
        cumulative_final_value_satoshi: attack_value,
    }
}
