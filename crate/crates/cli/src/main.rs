//! Command-line front end: run scenarios (builtin or from a TOML config),
//! list the builtin catalogue, validate config files.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bloatsim::scenario::{builtin, builtin_scenarios, ScenarioConfig};
use bloatsim::sim::run_scenario;

#[derive(Parser)]
#[command(name = "bloatsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario by builtin name or config-file path.
    Run {
        /// Builtin scenario name (see `list`) or path to a TOML config.
        scenario: String,
        /// Directory for CSV output; nothing is written without it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override any config field by dotted path, e.g.
        /// `--set duration_s=5` or `--set ues.0.discipline=codel`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        sets: Vec<String>,
    },
    /// List builtin scenarios.
    List,
    /// Parse and validate a config file without running it.
    Validate {
        config: PathBuf,
    },
}

fn load_scenario(name_or_path: &str) -> Result<ScenarioConfig> {
    if let Some(cfg) = builtin(name_or_path) {
        return Ok(cfg);
    }
    let path = PathBuf::from(name_or_path);
    if !path.exists() {
        bail!(
            "`{name_or_path}` is neither a builtin scenario nor a config file; \
             try `bloatsim list`"
        );
    }
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_toml(&text)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Parses `VALUE` as a TOML scalar, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    if let Ok(table) = probe.parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}

/// Applies one `path.to.field=value` override onto the TOML tree.
fn apply_set(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .with_context(|| format!("`--set {spec}` is not PATH=VALUE"))?;
    let value = parse_value(raw);
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if let Ok(idx) = part.parse::<usize>() {
            let arr = node
                .as_array_mut()
                .with_context(|| format!("`{}` is not an array", parts[..i].join(".")))?;
            let slot = arr
                .get_mut(idx)
                .with_context(|| format!("index {idx} out of range at `{path}`"))?;
            if last {
                *slot = value;
                return Ok(());
            }
            node = slot;
        } else {
            let table = node
                .as_table_mut()
                .with_context(|| format!("`{}` is not a table", parts[..i].join(".")))?;
            if last {
                table.insert(part.to_string(), value);
                return Ok(());
            }
            node = table
                .get_mut(*part)
                .with_context(|| format!("no field `{part}` under `{}`", parts[..i].join(".")))?;
        }
    }
    Ok(())
}

fn with_overrides(
    cfg: ScenarioConfig,
    seed: Option<u64>,
    sets: &[String],
) -> Result<ScenarioConfig> {
    let mut cfg = cfg;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if sets.is_empty() {
        return Ok(cfg);
    }
    let mut tree = toml::Value::try_from(&cfg).context("serializing config")?;
    for spec in sets {
        apply_set(&mut tree, spec)?;
    }
    tree.try_into().context("applying --set overrides")
}

fn cmd_run(
    scenario: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
    sets: &[String],
) -> Result<()> {
    let cfg = with_overrides(load_scenario(scenario)?, seed, sets)?;
    cfg.validate()?;
    let log = run_scenario(&cfg)?;
    println!("scenario {} (seed {}) ran to {}s", log.scenario, log.seed, log.duration);
    println!("flow  delivered_bytes  mean_goodput_bps  mean_rtt_s  p95_rtt_s");
    for s in log.flow_summary() {
        println!(
            "{:<5} {:<16} {:<17} {:<11} {}",
            s.flow, s.delivered_bytes, s.mean_goodput_bps, s.mean_rtt, s.p95_rtt
        );
    }
    for q in &log.queues {
        if let Some(last) = q.samples.samples().last() {
            println!("queue {}: final_len={} drops={}", q.ue, last.len_packets, last.cumulative_drops);
        }
    }
    if let Some(dir) = out {
        let files = log.emit_csv(&dir)?;
        println!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, seed, sets } => cmd_run(&scenario, out, seed, &sets),
        Command::List => {
            for cfg in builtin_scenarios() {
                println!("{}", cfg.name);
            }
            Ok(())
        }
        Command::Validate { config } => {
            let path = config.display().to_string();
            load_scenario(&path).and_then(|cfg| {
                cfg.validate()?;
                println!("{}: ok", path);
                Ok(())
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
