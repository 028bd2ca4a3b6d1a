use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use etfrp_core::envserver::{bind_tcp, serve_listener, serve_stdio, ServerConfig};
use etfrp_core::evaluation::{
    evaluate, format_table, run_bench, stat, summarize, write_csv, EvalError, PolicySpec, ScenarioSource,
};
use etfrp_core::netmodel::{fixtures, generate_instance, load_instance_file, save_instance, GeneratorParams};
use etfrp_core::trace::{replay, Trace};
use etfrp_core::NetworkInstance;

const EXIT_DIVERGENCE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "etfrp", version, about = "Electric truck fleet routing simulator and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic instance document.
    Gen {
        #[arg(long, default_value_t = 5)]
        trucks: usize,
        #[arg(long, default_value_t = 3)]
        stops: usize,
        #[arg(long, default_value_t = 40)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        chargers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one policy over seeded episodes and print mean ± std.
    Run {
        /// Instance file, or one of the built-in names `T1`, `T1-deterministic`.
        #[arg(long)]
        instance: String,
        #[arg(long, default_value = "heuristic")]
        policy: PolicySpec,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one trace per episode into this directory.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Run several policies on identical scenarios and report wins.
    Bench {
        #[arg(long)]
        instance: String,
        /// Comma-separated policy names.
        #[arg(long, value_delimiter = ',', default_value = "planner,heuristic,random")]
        policies: Vec<PolicySpec>,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-episode metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-execute a trace and check it bit for bit.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        instance: String,
    },
    /// Serve the environment protocol.
    Serve {
        /// `stdio` or `tcp:PORT` (or `tcp:HOST:PORT`).
        #[arg(long, default_value = "stdio")]
        transport: String,
        /// Instance used when a client does not name one.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
}

fn load(spec: &str) -> Result<NetworkInstance> {
    match spec {
        "T1" => Ok(fixtures::t1()),
        "T1-deterministic" => Ok(fixtures::t1_deterministic()),
        path => load_instance_file(path).with_context(|| format!("instance {path}")),
    }
}

fn cmd_gen(trucks: usize, stops: usize, nodes: usize, chargers: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let params = GeneratorParams {
        n_trucks: trucks,
        stops_per_truck: stops,
        n_nodes: nodes,
        n_chargers: chargers,
        ..GeneratorParams::default()
    };
    let inst = generate_instance(&params, seed)?;
    let text = save_instance(&inst);
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_run(instance: &str, policy: &PolicySpec, episodes: usize, seed: u64, trace_dir: Option<&Path>) -> Result<()> {
    let inst = Arc::new(load(instance)?);
    let rows = evaluate(&ScenarioSource::Fixed(inst), policy, episodes, seed, trace_dir.is_some())?;
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in &rows {
            if let Some(t) = &r.trace {
                let path = dir.join(format!("episode{}-seed{}.trace.jsonl", r.scenario, r.seed));
                t.write_file(&path).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    let stats = summarize(&rows.iter().map(|r| &r.metrics).collect::<Vec<_>>());
    println!("policy {policy}, {episodes} episodes, seeds {seed}..{}", seed + episodes as u64);
    if rows.is_empty() {
        println!("no episodes");
    } else {
        print!("{}", format_table(&stats));
    }
    Ok(())
}

fn cmd_bench(instance: &str, policies: &[PolicySpec], episodes: usize, seed: u64, csv: Option<&Path>) -> Result<()> {
    if policies.len() < 2 {
        bail!("bench needs at least two policies");
    }
    let inst = Arc::new(load(instance)?);
    let (report, rows) = run_bench(&ScenarioSource::Fixed(inst), policies, episodes, seed)?;
    for p in &report.policies {
        println!("== {}", p.policy);
        print!("{}", format_table(&p.stats));
        let norm = p.normalized_reward.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        println!("{:<30} {norm:>12}", format!("Normalized Reward ({})", report.reference));
        println!("{:<30} {:>12} ({:.1}%)", "Wins", p.wins, 100.0 * p.win_ratio);
        println!();
    }
    println!("{} scenarios, {} ties", report.scenarios, report.ties.len());
    let best = report
        .policies
        .iter()
        .max_by(|a, b| stat(&a.stats, "reward_total").mean.total_cmp(&stat(&b.stats, "reward_total").mean));
    if let Some(b) = best {
        println!("best mean reward: {}", b.policy);
    }
    if let Some(path) = csv {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(&rows, BufWriter::new(f))?;
    }
    Ok(())
}

fn cmd_replay(trace: &Path, instance: &str) -> Result<ExitCode> {
    let trace = Trace::read_file(trace).with_context(|| format!("trace {}", trace.display()))?;
    let inst = Arc::new(load(instance)?);
    let report = replay(&trace, inst)?;
    match &report.divergence {
        None => {
            println!("clean: {} records, {} decisions", report.records_checked, report.decisions_replayed);
            Ok(ExitCode::SUCCESS)
        }
        Some(d) => {
            println!("divergence at record {}: {}", d.record_index, d.detail);
            Ok(ExitCode::from(EXIT_DIVERGENCE))
        }
    }
}

fn cmd_serve(transport: &str, instance: Option<&str>, trace_dir: Option<PathBuf>) -> Result<()> {
    let default_instance = instance.map(load).transpose()?.map(Arc::new);
    let config = Arc::new(ServerConfig { default_instance, trace_dir });
    if transport == "stdio" {
        serve_stdio(config)?;
        return Ok(());
    }
    let Some(addr) = transport.strip_prefix("tcp:") else {
        bail!("unknown transport `{transport}` (expected stdio or tcp:PORT)");
    };
    let addr = if addr.contains(':') { addr.to_string() } else { format!("127.0.0.1:{addr}") };
    let listener = bind_tcp(&addr).with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    serve_listener(listener, config, None)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { trucks, stops, nodes, chargers, seed, out } => {
            cmd_gen(trucks, stops, nodes, chargers, seed, out.as_deref())?
        }
        Command::Run { instance, policy, episodes, seed, trace_dir } => {
            cmd_run(&instance, &policy, episodes, seed, trace_dir.as_deref())?
        }
        Command::Bench { instance, policies, episodes, seed, csv } => {
            cmd_bench(&instance, &policies, episodes, seed, csv.as_deref())?
        }
        Command::Replay { trace, instance } => return cmd_replay(&trace, &instance),
        Command::Serve { transport, instance, trace_dir } => cmd_serve(&transport, instance.as_deref(), trace_dir)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            // engine assertions inside an episode are the only runtime failures;
            // everything else is bad input or configuration
            if matches!(e.downcast_ref::<EvalError>(), Some(EvalError::Episode { .. })) {
                ExitCode::from(EXIT_DIVERGENCE)
            } else {
                ExitCode::from(EXIT_USAGE)
            }
        }
    }
}
