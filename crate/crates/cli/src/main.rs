//! Command-line driver: corpus generation, the analysis pipeline, mutation
//! tooling, and the propagation-race simulator.
//!
//! Exit codes: 0 success, 2 corpus error, 3 mutation error, 4 simulation
//! config error, 1 anything else. Every command is deterministic given its
//! flags and seed; timestamps in outputs come from corpus data, never the
//! wall clock.

mod output;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_bigint::BigUint;

use mallet_core::analytics::{aggregate, cumulative_series, default_periods, hourly_rate, Period};
use mallet_core::conflict::{build_conflict_sets, normalized_key};
use mallet_core::corpus::{generate_corpus, read_corpus, PlantPlan};
use mallet_core::mutation::{mutate, MutationContext, MutationError, MutationKind};
use mallet_core::netsim::{estimate_success, SimConfig, SimEstimate};
use mallet_core::sigcrypto::{KeyPair, Secp256k1Provider};
use mallet_core::tx::{deserialize_tx, serialize_tx};

#[derive(Parser)]
#[command(
    name = "mallet",
    version,
    about = "Detect, classify, and quantify Bitcoin transaction-malleability attacks on synthetic corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic corpus with planted conflicts and its
    /// ground-truth manifest.
    GenCorpus(GenCorpusArgs),
    /// Run the full pipeline over a corpus and write report files.
    Analyze(AnalyzeArgs),
    /// Apply one mutation to a transaction and print the result.
    Mutate(MutateArgs),
    /// Estimate attack success probability by simulation.
    Simulate(SimulateArgs),
}

#[derive(clap::Args)]
struct GenCorpusArgs {
    #[arg(long)]
    seed: u64,
    /// Corpus output path (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Manifest output path (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Plant plan JSON; a built-in demonstration plan is used if omitted.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Period schedule JSON overriding the default three periods.
    #[arg(long)]
    periods: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory for the report files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    periods: Option<PathBuf>,
    /// Fail (exit 2) on the first malformed corpus line instead of skipping.
    #[arg(long)]
    strict: bool,
    /// Bucket width for hourly.csv.
    #[arg(long, default_value_t = 1)]
    window_hours: u64,
}

#[derive(clap::Args)]
struct MutateArgs {
    /// Transaction hex.
    #[arg(long)]
    tx: String,
    /// Mutation kind name, e.g. non_minimal_push.
    #[arg(long)]
    kind: String,
    /// Input index to mutate.
    #[arg(long, default_value_t = 0)]
    input: usize,
    /// Secret key hex (32 bytes); required for re_sign.
    #[arg(long)]
    key: Option<String>,
    /// Signing nonce hex; required for re_sign.
    #[arg(long)]
    nonce: Option<String>,
    /// Referenced claiming condition hex; required for re_sign.
    #[arg(long)]
    script_pubkey: Option<String>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Simulation config JSON; built-in defaults if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for results.json (and sweep.csv when sweeping).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Sweep one parameter, e.g. --sweep attacker_connections=1,5,10,50,200.
    #[arg(long)]
    sweep: Option<String>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn general(message: impl ToString) -> CliError {
        CliError {
            code: 1,
            message: message.to_string(),
        }
    }

    fn corpus(message: impl ToString) -> CliError {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }

    fn mutation(message: impl ToString) -> CliError {
        CliError {
            code: 3,
            message: message.to_string(),
        }
    }

    fn simulation(message: impl ToString) -> CliError {
        CliError {
            code: 4,
            message: message.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenCorpus(args) => cmd_gen_corpus(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Mutate(args) => cmd_mutate(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn load_periods(path: &Option<PathBuf>) -> Result<Vec<Period>, CliError> {
    let Some(path) = path else {
        return Ok(default_periods());
    };
    let file =
        File::open(path).map_err(|e| CliError::general(format!("{}: {e}", path.display())))?;
    let periods: Vec<Period> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::general(format!("invalid period schedule: {e}")))?;
    if periods.is_empty() {
        return Err(CliError::general("period schedule is empty"));
    }
    Ok(periods)
}

fn cmd_gen_corpus(args: GenCorpusArgs) -> Result<(), CliError> {
    let plan: PlantPlan = match &args.plan {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::corpus(format!("{}: {e}", path.display())))?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(|e| CliError::corpus(format!("invalid plant plan: {e}")))?
        }
        None => PlantPlan::demo(),
    };
    let periods = load_periods(&args.periods)?;

    let generated =
        generate_corpus(args.seed, &plan, &periods).map_err(|e| CliError::corpus(e.to_string()))?;

    output::write_corpus_file(&args.out, &generated.records).map_err(CliError::general)?;
    output::write_json_file(&args.manifest, &generated.manifest).map_err(CliError::general)?;

    println!(
        "wrote {} records ({} planted conflict sets) to {}",
        generated.records.len(),
        generated.manifest.planted.len(),
        args.out.display()
    );
    println!("manifest: {}", args.manifest.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let file = File::open(&args.corpus)
        .map_err(|e| CliError::corpus(format!("{}: {e}", args.corpus.display())))?;
    let outcome = read_corpus(BufReader::new(file)).map_err(CliError::corpus)?;

    for error in &outcome.errors {
        eprintln!("{}: {error}", args.corpus.display());
    }
    if args.strict && !outcome.errors.is_empty() {
        return Err(CliError::corpus(format!(
            "{} malformed corpus line(s)",
            outcome.errors.len()
        )));
    }

    let periods = load_periods(&args.periods)?;
    let sets = build_conflict_sets(outcome.records).map_err(CliError::corpus)?;
    let aggregated = aggregate(&sets, &periods);
    let cumulative = cumulative_series(&sets);
    let hourly = hourly_rate(&sets, args.window_hours);

    output::write_reports(&args.out, &sets, &aggregated, &cumulative, &hourly)
        .map_err(CliError::general)?;

    println!(
        "{} conflict sets from {}",
        sets.len(),
        args.corpus.display()
    );
    for report in &aggregated.reports {
        println!(
            "{}: attack_sets={} total_value_btc={} successful={} success_rate_by_count={:.4} success_rate_by_value={:.4} re_sign_sets={} unknown_sets={}",
            report.period.name,
            report.attack_sets,
            report.total_value_btc(),
            report.successful,
            report.success_rate_by_count,
            report.success_rate_by_value,
            report.re_sign_sets,
            report.unknown_sets,
        );
    }
    if !aggregated.out_of_schedule.is_empty() {
        println!("out_of_schedule_sets={}", aggregated.out_of_schedule.len());
    }
    println!("reports written to {}", args.out.display());
    Ok(())
}

fn cmd_mutate(args: MutateArgs) -> Result<(), CliError> {
    let bytes =
        hex::decode(args.tx.trim()).map_err(|e| CliError::mutation(format!("bad tx hex: {e}")))?;
    let tx = deserialize_tx(&bytes).map_err(CliError::mutation)?;
    let kind = MutationKind::from_name(&args.kind).ok_or_else(|| {
        CliError::mutation(format!(
            "unknown kind '{}'; expected one of: {}",
            args.kind,
            MutationKind::IMPLEMENTED.map(|k| k.name()).join(", ")
        ))
    })?;

    let provider = Secp256k1Provider::new();
    let keypair = match &args.key {
        Some(hex_key) => {
            let raw = hex::decode(hex_key)
                .map_err(|e| CliError::mutation(format!("bad key hex: {e}")))?;
            let privkey: [u8; 32] = raw
                .try_into()
                .map_err(|_| CliError::mutation("key must be 32 bytes"))?;
            Some(KeyPair::from_privkey(privkey, &provider).map_err(CliError::mutation)?)
        }
        None => None,
    };
    let nonce = match &args.nonce {
        Some(hex_nonce) => Some(
            BigUint::parse_bytes(hex_nonce.as_bytes(), 16)
                .ok_or_else(|| CliError::mutation("bad nonce hex"))?,
        ),
        None => None,
    };
    let script_pubkey = match &args.script_pubkey {
        Some(hex_spk) => Some(
            hex::decode(hex_spk).map_err(|e| CliError::mutation(format!("bad script hex: {e}")))?,
        ),
        None => None,
    };

    let ctx = MutationContext {
        provider: &provider,
        keypair: keypair.as_ref(),
        nonce,
        referenced_script_pubkey: script_pubkey.as_deref(),
    };
    let mutated = mutate(&tx, kind, args.input, &ctx).map_err(|e| match e {
        MutationError::NotApplicable(_) | MutationError::MissingContext(_) => CliError::mutation(e),
        other => CliError::mutation(other),
    })?;

    println!("{}", hex::encode(serialize_tx(&mutated)));
    println!("txid: {}", mutated.txid());
    println!("previous_txid: {}", tx.txid());
    println!("normalized_key: {}", normalized_key(&mutated));
    debug_assert_eq!(normalized_key(&mutated), normalized_key(&tx));
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config: SimConfig = match &args.config {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::simulation(format!("{}: {e}", path.display())))?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(|e| CliError::simulation(format!("invalid config: {e}")))?
        }
        None => SimConfig::default(),
    };
    config.validate().map_err(CliError::simulation)?;

    match &args.sweep {
        None => {
            let estimate = estimate_success(&config).map_err(CliError::simulation)?;
            output::write_sim_results(&args.out, &config, &[(None, estimate)])
                .map_err(CliError::general)?;
            print_estimate(None, &estimate);
        }
        Some(sweep) => {
            let values = parse_sweep(sweep)?;
            let mut rows = Vec::with_capacity(values.len());
            for value in values {
                let swept = SimConfig {
                    attacker_connections: value,
                    ..config.clone()
                };
                swept.validate().map_err(CliError::simulation)?;
                let estimate = estimate_success(&swept).map_err(CliError::simulation)?;
                print_estimate(Some(value), &estimate);
                rows.push((Some(value), estimate));
            }
            output::write_sim_results(&args.out, &config, &rows).map_err(CliError::general)?;
        }
    }
    Ok(())
}

/// Parses `attacker_connections=a,b,c` into sorted distinct values.
fn parse_sweep(sweep: &str) -> Result<Vec<usize>, CliError> {
    let (name, list) = sweep
        .split_once('=')
        .ok_or_else(|| CliError::simulation("sweep must look like attacker_connections=1,5,10"))?;
    if name != "attacker_connections" {
        return Err(CliError::simulation(format!(
            "unsupported sweep parameter '{name}'"
        )));
    }
    let mut values = Vec::new();
    for part in list.split(',') {
        values.push(
            part.trim()
                .parse::<usize>()
                .map_err(|_| CliError::simulation(format!("bad sweep value '{part}'")))?,
        );
    }
    values.sort_unstable();
    values.dedup();
    if values.is_empty() {
        return Err(CliError::simulation("sweep has no values"));
    }
    Ok(values)
}

fn print_estimate(connections: Option<usize>, estimate: &SimEstimate) {
    let prefix = match connections {
        Some(c) => format!("attacker_connections={c} "),
        None => String::new(),
    };
    println!(
        "{prefix}probability={:.4} wilson=[{:.4}, {:.4}] trials={} first_seen_original={:.4}",
        estimate.probability,
        estimate.wilson_low,
        estimate.wilson_high,
        estimate.trials,
        estimate.mean_first_seen_original_fraction,
    );
}
