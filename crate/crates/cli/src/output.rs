//! Report emission: JSON and CSV files, written atomically (temp + rename).

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use mallet_core::analytics::{format_btc, AggregateOutcome, RateBucket, TimeSeriesPoint};
use mallet_core::conflict::{ConflictSet, CorpusRecord, Outcome, SetClassification};
use mallet_core::corpus::write_corpus;
use mallet_core::netsim::{SimConfig, SimEstimate};

fn iso(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .ok_or_else(|| format!("{}: not a file path", path.display()))?;
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| format!("{}: {e}", tmp.display()))?;
    fs::rename(&tmp, path).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_corpus_file(path: &Path, records: &[CorpusRecord]) -> Result<(), String> {
    let mut buffer = Vec::new();
    write_corpus(&mut buffer, records).map_err(|e| e.to_string())?;
    atomic_write(path, &buffer)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut json = serde_json::to_vec_pretty(value).map_err(|e| e.to_string())?;
    json.push(b'\n');
    atomic_write(path, &json)
}

#[derive(Serialize)]
struct MemberRow {
    txid: String,
    first_seen: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    confirmed_in: Option<u64>,
}

#[derive(Serialize)]
struct SetRow<'a> {
    key: String,
    value_satoshi: u64,
    value_btc: String,
    classification: &'a SetClassification,
    outcome: Outcome,
    /// Present for attack sets: the member inferred to be the original.
    #[serde(skip_serializing_if = "Option::is_none")]
    original_txid: Option<String>,
    members: Vec<MemberRow>,
}

#[derive(Serialize)]
struct PeriodRow {
    name: String,
    start: String,
    end: String,
    attack_sets: u64,
    re_sign_sets: u64,
    unknown_sets: u64,
    total_value_satoshi: u64,
    total_value_btc: String,
    re_sign_value_satoshi: u64,
    re_sign_value_btc: String,
    successful: u64,
    success_value_satoshi: u64,
    success_value_btc: String,
    success_rate_by_count: f64,
    success_rate_by_value: f64,
}

#[derive(Serialize)]
struct PeriodReportFile {
    periods: Vec<PeriodRow>,
    out_of_schedule: Vec<String>,
}

pub fn write_reports(
    dir: &Path,
    sets: &[ConflictSet],
    aggregated: &AggregateOutcome,
    cumulative: &[TimeSeriesPoint],
    hourly: &[RateBucket],
) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;

    let set_rows: Vec<SetRow> = sets
        .iter()
        .map(|set| SetRow {
            key: set.key.to_string(),
            value_satoshi: set.value_satoshi,
            value_btc: format_btc(set.value_satoshi),
            classification: &set.classification,
            outcome: set.outcome,
            original_txid: set
                .original_member()
                .map(|i| set.members[i].tx.txid().to_string()),
            members: set
                .members
                .iter()
                .map(|m| MemberRow {
                    txid: m.tx.txid().to_string(),
                    first_seen: iso(m.first_seen),
                    confirmed_in: m.confirmed_in,
                })
                .collect(),
        })
        .collect();
    write_json_file(&dir.join("conflict_sets.json"), &set_rows)?;

    let period_rows: Vec<PeriodRow> = aggregated
        .reports
        .iter()
        .map(|r| PeriodRow {
            name: r.period.name.clone(),
            start: iso(r.period.start),
            end: iso(r.period.end),
            attack_sets: r.attack_sets,
            re_sign_sets: r.re_sign_sets,
            unknown_sets: r.unknown_sets,
            total_value_satoshi: r.total_value_satoshi,
            total_value_btc: r.total_value_btc(),
            re_sign_value_satoshi: r.re_sign_value_satoshi,
            re_sign_value_btc: format_btc(r.re_sign_value_satoshi),
            successful: r.successful,
            success_value_satoshi: r.success_value_satoshi,
            success_value_btc: r.success_value_btc(),
            success_rate_by_count: r.success_rate_by_count,
            success_rate_by_value: r.success_rate_by_value,
        })
        .collect();
    let report_file = PeriodReportFile {
        periods: period_rows,
        out_of_schedule: aggregated
            .out_of_schedule
            .iter()
            .map(|k| k.to_string())
            .collect(),
    };
    write_json_file(&dir.join("period_report.json"), &report_file)?;

    let mut csv = String::from(
        "period,start,end,attack_sets,re_sign_sets,unknown_sets,total_value_btc,successful,success_value_btc,success_rate_by_count,success_rate_by_value\n",
    );
    for r in &report_file.periods {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.4},{:.4}\n",
            r.name,
            r.start,
            r.end,
            r.attack_sets,
            r.re_sign_sets,
            r.unknown_sets,
            r.total_value_btc,
            r.successful,
            r.success_value_btc,
            r.success_rate_by_count,
            r.success_rate_by_value,
        ));
    }
    atomic_write(&dir.join("period_report.csv"), csv.as_bytes())?;

    let mut csv = String::from("t_iso8601,cumulative_count,cumulative_value_btc\n");
    for point in cumulative {
        csv.push_str(&format!(
            "{},{},{}\n",
            iso(point.t),
            point.cumulative_count,
            format_btc(point.cumulative_value_satoshi),
        ));
    }
    atomic_write(&dir.join("cumulative.csv"), csv.as_bytes())?;

    let mut csv = String::from("t_iso8601,attack_sets,attacks_per_hour\n");
    for bucket in hourly {
        csv.push_str(&format!(
            "{},{},{}\n",
            iso(bucket.start),
            bucket.attack_sets,
            bucket.attacks_per_hour,
        ));
    }
    atomic_write(&dir.join("hourly.csv"), csv.as_bytes())
}

#[derive(Serialize)]
struct SimRow {
    attacker_connections: usize,
    #[serde(flatten)]
    estimate: SimEstimate,
}

#[derive(Serialize)]
struct SimResultsFile<'a> {
    config: &'a SimConfig,
    results: Vec<SimRow>,
}

pub fn write_sim_results(
    dir: &Path,
    config: &SimConfig,
    rows: &[(Option<usize>, SimEstimate)],
) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;

    let results: Vec<SimRow> = rows
        .iter()
        .map(|(connections, estimate)| SimRow {
            attacker_connections: connections.unwrap_or(config.attacker_connections),
            estimate: *estimate,
        })
        .collect();
    write_json_file(
        &dir.join("results.json"),
        &SimResultsFile { config, results },
    )?;

    let sweeping = rows.iter().any(|(c, _)| c.is_some());
    if sweeping {
        let mut csv = String::from(
            "attacker_connections,probability,wilson_low,wilson_high,trials,modified_wins\n",
        );
        for (connections, estimate) in rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                connections.unwrap_or(config.attacker_connections),
                estimate.probability,
                estimate.wilson_low,
                estimate.wilson_high,
                estimate.trials,
                estimate.modified_wins,
            ));
        }
        atomic_write(&dir.join("sweep.csv"), csv.as_bytes())?;
    }
    Ok(())
}
