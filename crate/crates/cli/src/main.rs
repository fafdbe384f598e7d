//! `ringmpc`: run protocols from JSON configurations or flags, replay
//! transcripts and check secrecy claims.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid input or schema,
//! 3 topology rejected, 4 cheating detected or transcript divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ringmpc::analysis::{secrecy_enumeration_check, SecrecySpec};
use ringmpc::config::{execute, replay, ProtocolConfig, ReplayVerdict, RunConfig};
use ringmpc::protocols::arith::dummy_triangle;
use ringmpc::protocols::commitment::{CommitmentLedger, SplitMode};
use ringmpc::protocols::poker::fixed_hands_layout;
use ringmpc::protocols::secret_sharing::{reconstruct, share_graph, ShareVector};
use ringmpc::{Capability, ChannelGraph, Error, RingElement, RingSpec, RunEnv, Transcript};

#[derive(Parser)]
#[command(name = "ringmpc", version, about = "Unconditionally secure multi-party protocols on a simulated network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every party's random tape.
    #[arg(long)]
    seed: Option<u64>,
    /// Ring: `Z_m` (or just `m`) for integers mod m, `Z:B` for integers with noise bound B.
    #[arg(long)]
    ring: Option<String>,
    /// Where to write the transcript (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol from a JSON configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-execute a transcript and report the first divergent message.
    Replay { transcript: PathBuf },
    /// Check a secrecy claim by exhaustive enumeration.
    Verify {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Deal a deck of numbered cards.
    Deal {
        #[arg(long)]
        cards: u64,
        #[arg(long, default_value_t = 3)]
        players: usize,
        #[arg(long, default_value_t = 10)]
        counter_bound: u64,
        /// `auto` or a count. Dummies hold the undealt cards.
        #[arg(long)]
        dummies: Option<String>,
        /// Exact hand size for every real player (dummy-dealer mode).
        #[arg(long)]
        per_player: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Split a secret into k additive shares.
    Share {
        #[arg(long, allow_hyphen_values = true)]
        secret: String,
        #[arg(long, default_value_t = 3)]
        players: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Add up the shares in a file written by `share`.
    Reconstruct {
        #[arg(long)]
        shares: PathBuf,
    },
    /// Three-party commitment.
    Commit3 {
        /// Comma-separated inputs of P0, P1, P2.
        #[arg(long, allow_hyphen_values = true)]
        inputs: String,
        /// Split mode: `integer` or `bit`.
        #[arg(long, default_value = "integer")]
        mode: String,
        #[command(flatten)]
        common: Common,
    },
    /// Open a three-party commitment from the ledgers printed by `commit3`.
    Decommit3 {
        #[arg(long)]
        ledgers: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Two-party commitment with a dummy helper.
    Commit2 {
        #[arg(long, allow_hyphen_values = true)]
        inputs: String,
        #[command(flatten)]
        common: Common,
    },
    /// Oblivious transfer with a dummy helper.
    Ot {
        #[arg(long, allow_hyphen_values = true)]
        messages: String,
        /// 1-based indices the receiver wants.
        #[arg(long)]
        indices: String,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_ring(s: &str) -> anyhow::Result<RingSpec> {
    let s = s.trim();
    let bad = || Error::input(format!("cannot read ring {s:?}; use Z_m, m, Z or Z:B"));
    let spec = if let Some(b) = s.strip_prefix("Z:") {
        RingSpec::integers(b.parse().map_err(|_| bad())?)
    } else if s == "Z" {
        RingSpec::integers(1_000_000)
    } else {
        let m = s.strip_prefix("Z_").unwrap_or(s);
        RingSpec::modular_big(m.parse().map_err(|_| bad())?)
    };
    Ok(spec.map_err(Error::from)?)
}

fn parse_elements(s: &str) -> anyhow::Result<Vec<RingElement>> {
    s.split(',')
        .map(|x| {
            serde_json::from_value(json!(x.trim())).map_err(|_| Error::input(format!("not an integer: {x:?}")).into())
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidInput(_) | Error::Ring(_) | Error::Transcript(_) | Error::WrongPhase { .. }) => 2,
        Some(Error::Topology(_)) => 3,
        Some(Error::CheatDetected { .. }) => 4,
        _ => 1,
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON value"));
}

/// Runs one configured protocol, writes its transcript and prints the result.
fn run_and_report(
    cfg: &ProtocolConfig,
    ring: Option<&RingSpec>,
    graph: ChannelGraph,
    roster: Option<Vec<Capability>>,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let report = execute(cfg, ring, graph, roster, RunEnv::seeded(seed))?;
    let path = out.unwrap_or_else(|| PathBuf::from(format!("{}-{seed}.jsonl", cfg.name())));
    report.transcript.write_jsonl(&path).map_err(Error::from)?;
    print(&json!({
        "protocol": cfg.name(),
        "seed": seed,
        "result": report.result,
        "messages": report.transcript.messages.len(),
        "transcript": path,
    }));
    Ok(ExitCode::SUCCESS)
}

fn ring_or(common: &Common, default: &str) -> anyhow::Result<RingSpec> {
    parse_ring(common.ring.as_deref().unwrap_or(default))
}

fn dispatch(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Run { config, common } => {
            let mut cfg = RunConfig::from_json(&read(&config)?)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(r) = &common.ring {
                cfg.ring = Some(parse_ring(r)?);
            }
            let graph = cfg.graph()?;
            run_and_report(
                &cfg.protocol,
                cfg.ring.as_ref(),
                graph,
                cfg.roster.clone(),
                cfg.seed,
                common.out.or(cfg.output.clone()),
            )
        }
        Command::Replay { transcript } => {
            let t = Transcript::read_jsonl(&transcript).map_err(Error::from)?;
            match replay(&t)? {
                ReplayVerdict::Verified { messages } => {
                    print(&json!({ "verdict": "verified", "messages": messages }));
                    Ok(ExitCode::SUCCESS)
                }
                ReplayVerdict::Diverged(d) => {
                    print(&json!({
                        "verdict": "diverged",
                        "seq": d.seq,
                        "recorded": d.recorded,
                        "expected": d.expected,
                    }));
                    Ok(ExitCode::from(4))
                }
            }
        }
        Command::Verify { spec } => {
            let spec: SecrecySpec =
                serde_json::from_str(&read(&spec)?).map_err(|e| Error::input(format!("invalid secrecy spec: {e}")))?;
            let verdict = secrecy_enumeration_check(&spec)?;
            let mut v = serde_json::to_value(&verdict)?;
            v["protocol"] = json!(spec.protocol);
            v["observer"] = json!(spec.observer.to_string());
            print(&v);
            Ok(if verdict.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Deal {
            cards,
            players,
            counter_bound,
            dummies,
            per_player,
            common,
        } => {
            let seed = common.seed.unwrap_or(0);
            let dummy_mode = dummies.is_some() || per_player.is_some();
            if !dummy_mode {
                let cfg = ProtocolConfig::Deal {
                    cards,
                    counter_bound,
                    quotas: None,
                    shuffle: true,
                    distribute: true,
                    dealer: None,
                };
                return run_and_report(&cfg, None, ChannelGraph::cycle(players)?, None, seed, common.out);
            }
            let s = match per_player {
                Some(s) => s,
                None => cards / (players as u64 + 1),
            };
            let d = match dummies.as_deref() {
                None | Some("auto") => None,
                Some(x) => Some(x.parse::<usize>().map_err(|_| Error::input(format!("--dummies: {x:?}")))?),
            };
            let (graph, roster, quotas) = fixed_hands_layout(cards, players, s, d)?;
            let cfg = ProtocolConfig::Deal {
                cards,
                counter_bound,
                quotas: Some(quotas),
                shuffle: true,
                distribute: true,
                dealer: Some(players),
            };
            run_and_report(&cfg, None, graph, Some(roster), seed, common.out)
        }
        Command::Share { secret, players, common } => {
            let ring = ring_or(&common, "Z_101")?;
            let secret = parse_elements(&secret)?.pop().ok_or_else(|| Error::input("missing secret"))?;
            let cfg = ProtocolConfig::Share { secret };
            run_and_report(&cfg, Some(&ring), share_graph(players)?, None, common.seed.unwrap_or(0), common.out)
        }
        Command::Reconstruct { shares } => {
            let text = read(&shares)?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Error::input(format!("invalid shares file: {e}")))?;
            // Accept a bare share vector or the output of `share`.
            let inner = v.pointer("/result").cloned().unwrap_or(v);
            let sv: ShareVector =
                serde_json::from_value(inner).map_err(|e| Error::input(format!("invalid shares file: {e}")))?;
            let secret = reconstruct(&sv)?;
            print(&json!({ "secret": secret }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Commit3 { inputs, mode, common } => {
            let ring = ring_or(&common, "Z_101")?;
            let mode = match mode.as_str() {
                "integer" => SplitMode::Integer,
                "bit" => SplitMode::Bit,
                m => return Err(Error::input(format!("unknown split mode {m:?}")).into()),
            };
            let cfg = ProtocolConfig::Commit3 {
                inputs: parse_elements(&inputs)?,
                mode,
            };
            run_and_report(&cfg, Some(&ring), ChannelGraph::cycle(3)?, None, common.seed.unwrap_or(0), common.out)
        }
        Command::Decommit3 { ledgers, common } => {
            let ledgers = read_ledgers(&ledgers)?;
            let ring = match &common.ring {
                Some(r) => parse_ring(r)?,
                None => return Err(Error::input("decommit3 needs --ring (the ring used to commit)").into()),
            };
            let cfg = ProtocolConfig::Decommit3 { ledgers };
            run_and_report(&cfg, Some(&ring), ChannelGraph::cycle(3)?, None, common.seed.unwrap_or(0), common.out)
        }
        Command::Commit2 { inputs, common } => {
            let ring = ring_or(&common, "Z_101")?;
            let cfg = ProtocolConfig::Commit2 {
                inputs: parse_elements(&inputs)?,
            };
            run_and_report(&cfg, Some(&ring), dummy_triangle(), None, common.seed.unwrap_or(0), common.out)
        }
        Command::Ot {
            messages,
            indices,
            common,
        } => {
            let ring = ring_or(&common, "Z_101")?;
            let indices = indices
                .split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| Error::input(format!("bad index {x:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = ProtocolConfig::Ot {
                messages: parse_elements(&messages)?,
                indices,
            };
            run_and_report(&cfg, Some(&ring), dummy_triangle(), None, common.seed.unwrap_or(0), common.out)
        }
    }
}

/// Ledgers as a bare array or inside the output of `commit3`.
fn read_ledgers(path: &Path) -> anyhow::Result<Vec<CommitmentLedger>> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(|e| Error::input(format!("invalid ledgers file: {e}")))?;
    let inner = v.pointer("/result/ledgers").cloned().unwrap_or(v);
    serde_json::from_value(inner).map_err(|e| anyhow!(Error::input(format!("invalid ledgers file: {e}"))))
}
