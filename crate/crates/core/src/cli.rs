//! Command-line harness: bound computation, scenario simulation and fuzzing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capgraph::{capacity_upper_bound, four_node_terms, node_name, BoundReport, NetworkSpec};
use crate::netsim::adversary::partition_candidates;
use crate::netsim::{
    run_execution, AdversaryStrategy, Behavior, InputPattern, PartitionSide, RateConfig, RunOptions, Scenario,
    SimError, ThroughputReport, Violation,
};
use crate::rbcast::TagKind;

/// A scenario file.
pub type ScenarioConfig = Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Validation(m),
            SimError::Invariant(v) => CliError::Invariant(v.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
struct NetworkOnly {
    network: NetworkSpec,
}

/// Exhaustive bound by bitmask enumeration, sharing no code with
/// [`capacity_upper_bound`].
pub fn brute_force_bound(net: &NetworkSpec) -> Option<u64> {
    let n = net.n;
    let full = (1u32 << n) - 1;
    let mut best: Option<u64> = None;
    for s in 1..=full {
        let sz = s.count_ones() as usize;
        if sz > net.f || n < sz + net.f {
            continue;
        }
        let rest = full & !s;
        let want = n - sz - net.f;
        // every subset of the complement with the right size
        let mut g = rest;
        loop {
            if g.count_ones() as usize == want {
                let mut sum = 0;
                for j in (0..n).filter(|j| g >> j & 1 == 1) {
                    for i in (0..n).filter(|i| s >> i & 1 == 1) {
                        sum += net.cap[j][i];
                    }
                }
                best = Some(best.map_or(sum, |b| b.min(sum)));
            }
            if g == 0 {
                break;
            }
            g = (g - 1) & rest;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundOutput {
    #[serde(flatten)]
    pub report: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brute_force: Option<u64>,
}

pub fn cmd_bound(config: &Path, brute_force: bool) -> Result<(BoundOutput, String), CliError> {
    let cfg: NetworkOnly =
        serde_json::from_str(&read(config)?).map_err(|e| CliError::Validation(format!("{}: {e}", config.display())))?;
    let net = cfg.network;
    net.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let report = capacity_upper_bound(&net).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut text = String::new();
    writeln!(text, "i_star = {}", report.i_star).unwrap();
    writeln!(
        text,
        "witness S = {}  gamma = {}",
        report.witness_s, report.witness_gamma
    )
    .unwrap();
    if net.n == 4 && net.f == 1 {
        if let Ok(terms) = four_node_terms(&net) {
            writeln!(text, "{:>4} {:>6} {:>8}", "S", "gamma", "incoming").unwrap();
            for (s, j, k, v) in terms {
                writeln!(
                    text,
                    "{:>4} {:>6} {:>8}",
                    node_name(s),
                    format!("{}{}", node_name(j), node_name(k)),
                    v
                )
                .unwrap();
            }
        }
    }
    let brute = if brute_force {
        let b = brute_force_bound(&net);
        writeln!(text, "brute_force = {}", b.map_or("none".into(), |b| b.to_string())).unwrap();
        if b != Some(report.i_star) {
            return Err(CliError::Invariant(format!(
                "bound {} disagrees with brute force {b:?}",
                report.i_star
            )));
        }
        b
    } else {
        None
    };
    Ok((
        BoundOutput {
            report,
            brute_force: brute,
        },
        text,
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationFile {
    pub scenario: ScenarioConfig,
    pub report: ThroughputReport,
}

pub fn summary_line(r: &ThroughputReport) -> String {
    format!(
        "rate {:.1} bits/unit | ratio {:.4} of I*c = {} | failures detected {} | final mode {}",
        r.totals.rate, r.totals.ratio, r.totals.i_star_bits, r.failures_detected, r.final_mode
    )
}

pub fn cmd_simulate(config: &Path, out: &Path) -> Result<ThroughputReport, CliError> {
    let scenario = load_scenario(config)?;
    let report = run_execution(&scenario, RunOptions::default())?;
    let file = SimulationFile {
        scenario,
        report: report.clone(),
    };
    let json = serde_json::to_string_pretty(&file).expect("report serializes");
    std::fs::write(out, json).map_err(|source| CliError::Io {
        path: out.to_owned(),
        source,
    })?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub violation: Violation,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub trials: u64,
    pub seed: u64,
    pub passed: u64,
    pub violations: Vec<TrialFailure>,
}

fn random_subset<R: Rng>(rng: &mut R, pool: &[usize]) -> Vec<usize> {
    loop {
        let pick: Vec<usize> = pool.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if !pick.is_empty() {
            return pick;
        }
    }
}

/// A random protocol-runnable scenario: caps 1..=10, `R < I*`, one adversary
/// from the catalog.
pub fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let cap = (0..4)
        .map(|i| (0..4).map(|j| if i == j { 0 } else { rng.gen_range(1..=10) }).collect())
        .collect();
    let net = NetworkSpec::new(4, 1, cap).expect("valid random net");
    let bound = capacity_upper_bound(&net).expect("bound").i_star;
    let r = rng.gen_range(1..bound) as usize;
    let generations = rng.gen_range(4..=24);
    let faulty = rng.gen_range(0..4);
    let others: Vec<usize> = (0..4).filter(|&v| v != faulty).collect();
    let input_pattern = match rng.gen_range(0..3) {
        0 => InputPattern::AllEqual,
        1 => InputPattern::OneDiffers {
            node: rng.gen_range(0..4),
        },
        _ => InputPattern::AllRandom,
    };
    let l = rng.gen_range(1..=3);
    let behavior = match rng.gen_range(0..7) {
        0 => Behavior::None,
        1 => Behavior::Crash {
            from_generation: rng.gen_range(0..generations),
        },
        2 => Behavior::CorruptPayload {
            targets: random_subset(rng, &others),
            positions: random_subset(rng, &(0..l).collect::<Vec<_>>()),
        },
        3 => Behavior::EquivocateInput {
            targets: random_subset(rng, &others),
        },
        4 => Behavior::LieNotifications {
            tags: match rng.gen_range(0..3) {
                0 => vec![TagKind::Equality],
                1 => vec![TagKind::Consistency],
                _ => vec![TagKind::Equality, TagKind::Consistency],
            },
        },
        5 => Behavior::PartitionMimic {
            side: if rng.gen_bool(0.5) {
                PartitionSide::S
            } else {
                PartitionSide::X
            },
        },
        _ => Behavior::RandomByzantine { seed: rng.gen() },
    };
    let adversary = match &behavior {
        Behavior::None => AdversaryStrategy::none(),
        Behavior::PartitionMimic { side } => {
            let pool = partition_candidates(&net, *side).expect("bound");
            AdversaryStrategy::new(*pool.choose(rng).expect("nonempty side"), behavior)
        }
        _ => AdversaryStrategy::new(faulty, behavior),
    };
    Scenario {
        network: net,
        rate: RateConfig {
            packets: r,
            packet_bits: 16 * l,
        },
        generations,
        input_pattern,
        adversary,
        seed: rng.gen(),
        traffic_log: false,
    }
}

pub fn cmd_fuzz(trials: u64, seed: u64, options: RunOptions) -> Result<FuzzSummary, CliError> {
    if trials == 0 {
        return Err(CliError::Validation("fuzz needs --trials >= 1".into()));
    }
    let mut results: Vec<(u64, Result<(), TrialFailure>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let scenario = random_scenario(&mut rng);
            let res = match run_execution(&scenario, options) {
                Ok(_) => Ok(()),
                Err(SimError::Invariant(violation)) => Err(TrialFailure {
                    trial,
                    violation,
                    scenario,
                }),
                Err(SimError::Config(m)) => panic!("fuzz generated an invalid scenario: {m}"),
            };
            (trial, res)
        })
        .collect();
    results.sort_by_key(|(t, _)| *t);
    let violations: Vec<TrialFailure> = results.into_iter().filter_map(|(_, r)| r.err()).collect();
    Ok(FuzzSummary {
        trials,
        seed,
        passed: trials - violations.len() as u64,
        violations,
    })
}

#[derive(Parser, Debug)]
#[command(
    name = "byzcap",
    version,
    about = "Capacity bounds and a coded Byzantine consensus simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the capacity upper bound of a network.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, hide = true)]
        brute_force: bool,
    },
    /// Run a scenario and write the report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run random scenarios and check protocol invariants.
    Fuzz {
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, hide = true)]
        mutant_skip_d_consistency: bool,
    },
}

/// Run the CLI and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Bound { config, brute_force } => cmd_bound(&config, brute_force).map(|(out, text)| {
            print!("{text}");
            println!("{}", serde_json::to_string(&out).expect("serializes"));
        }),
        Command::Simulate { config, out } => cmd_simulate(&config, &out).map(|r| println!("{}", summary_line(&r))),
        Command::Fuzz {
            trials,
            seed,
            mutant_skip_d_consistency,
        } => cmd_fuzz(
            trials,
            seed,
            RunOptions {
                skip_d_consistency: mutant_skip_d_consistency,
            },
        )
        .and_then(|s| {
            println!(
                "{} trials, seed {}: {} passed, {} violations",
                s.trials,
                s.seed,
                s.passed,
                s.violations.len()
            );
            match s.violations.first() {
                None => Ok(()),
                Some(first) => {
                    println!("first counterexample (trial {}): {}", first.trial, first.violation);
                    println!("{}", serde_json::to_string_pretty(&first.scenario).expect("serializes"));
                    Err(CliError::Invariant(format!("{} violations", s.violations.len())))
                }
            }
        }),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
