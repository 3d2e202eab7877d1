//! Command line front end for the duty-cycling simulator.
//!
//! Subcommands:
//! - `run <config>`: execute an experiment and write its result files.
//! - `bounds`: evaluate pull-count ceilings and the regret envelope for
//!   given reward gaps.
//! - `validate <trace>`: check a harvest/light trace file and print its
//!   vital statistics.
//! - `layers <positions>`: build the routing layers for a deployment
//!   and print them as CSV.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use odc_core::bandit::pull_count_bound;
use odc_core::config::ExperimentConfig;
use odc_core::experiment::regret::{regret_envelope, BoundInputs};
use odc_core::experiment::{run_experiment, write_outputs};
use odc_core::network::build_layers;
use odc_core::trace::load_trace;

#[derive(Parser)]
#[command(name = "odc", version, about = "Duty-cycling simulator for solar-harvesting sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Evaluate pull-count ceilings and the regret envelope.
    Bounds(BoundsArgs),
    /// Validate a trace file and print its statistics.
    Validate(ValidateArgs),
    /// Build routing layers from a node position file.
    Layers(LayersArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a key = value config file.
    config: PathBuf,
    /// Write result files here instead of the config's output_dir
    /// (the ODC_OUT_DIR environment variable does the same).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Per-cost reward gap of a suboptimal arm; repeat per arm.
    #[arg(long = "delta", required = true)]
    deltas: Vec<f64>,
    /// Largest per-pull action cost.
    #[arg(long, default_value_t = 1.0)]
    cmax: f64,
    /// Smallest per-pull action cost.
    #[arg(long, default_value_t = 1.0)]
    cmin: f64,
    /// Exploration constant.
    #[arg(long, default_value_t = 2.0)]
    eprime: f64,
    /// Operational slot count to evaluate at.
    #[arg(long, default_value_t = 10_000.0)]
    horizon: f64,
    /// Reference reward per unit cost for the envelope.
    #[arg(long, default_value_t = 1.0)]
    ustar: f64,
    /// Include the banking arm's ceiling (one extra pull).
    #[arg(long)]
    store: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// CSV trace with header slot,harvest_ma,lux.
    trace: PathBuf,
}

#[derive(Args)]
struct LayersArgs {
    /// CSV with header x,y; row order assigns node ids from 0.
    positions: PathBuf,
    /// Radio range in the position units.
    #[arg(long)]
    radius: f64,
    /// Node id acting as the collection point.
    #[arg(long, default_value_t = 0)]
    sink: usize,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Bounds(args) => bounds(args),
        Command::Validate(args) => validate(args),
        Command::Layers(args) => layers(args),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let config = ExperimentConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    let out_dir = args
        .out_dir
        .or_else(|| std::env::var_os("ODC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| config.output_dir.clone());
    let result = run_experiment(&config).context("experiment failed")?;
    let written = write_outputs(&result, &out_dir)
        .with_context(|| format!("writing results under {}", out_dir.display()))?;
    println!("trials: {}", result.trials.len());
    for (kind, mean) in result.mean_totals() {
        println!("mean total voi [{}]: {:.6}", kind.label(), mean);
    }
    for (kind, report) in &result.regret {
        let last = report.regret.last().copied().unwrap_or(0.0);
        let envelope = report.bound.last().copied().unwrap_or(0.0);
        println!(
            "final regret [{}]: {:.6} (envelope {:.6})",
            kind.label(),
            last,
            envelope
        );
    }
    println!("wrote {} files to {}", written.len(), out_dir.display());
    Ok(())
}

fn bounds(args: BoundsArgs) -> anyhow::Result<()> {
    for &gap in &args.deltas {
        let ceiling =
            pull_count_bound(gap, args.cmax, args.cmin, args.eprime, args.horizon, false)?;
        println!("gap {:.6}: at most {:.6} pulls", gap, ceiling);
    }
    if args.store {
        let smallest = args
            .deltas
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let ceiling =
            pull_count_bound(smallest, args.cmax, args.cmin, args.eprime, args.horizon, true)?;
        println!("banking arm: at most {:.6} pulls", ceiling);
    }
    let inputs = BoundInputs {
        deltas: args.deltas,
        c_max: args.cmax,
        c_min: args.cmin,
        e_prime: args.eprime,
        u_star: args.ustar,
    };
    let envelope = regret_envelope(&inputs, args.horizon)?;
    println!("regret envelope at {} slots: {:.6}", args.horizon, envelope);
    Ok(())
}

fn validate(args: ValidateArgs) -> anyhow::Result<()> {
    let records = load_trace(&args.trace)
        .with_context(|| format!("validating {}", args.trace.display()))?;
    let total: f64 = records.iter().map(|r| r.harvest_ma).sum();
    let peak = records.iter().map(|r| r.harvest_ma).fold(0.0, f64::max);
    let lux_peak = records.iter().map(|r| r.lux).fold(0.0, f64::max);
    println!("{} slots", records.len());
    println!("harvest total {:.6} mA-slot, peak {:.6} mA", total, peak);
    println!("lux peak {:.6}", lux_peak);
    Ok(())
}

fn layers(args: LayersArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.positions)
        .with_context(|| format!("reading {}", args.positions.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == "x,y" => {}
        Some(header) => bail!("expected header 'x,y', found '{}'", header.trim()),
        None => bail!("empty position file"),
    }
    let mut positions = Vec::new();
    for (index, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            bail!("line {}: {} columns instead of 2", index + 2, fields.len());
        }
        let x: f64 = fields[0]
            .trim()
            .parse()
            .with_context(|| format!("line {}: bad x", index + 2))?;
        let y: f64 = fields[1]
            .trim()
            .parse()
            .with_context(|| format!("line {}: bad y", index + 2))?;
        positions.push((x, y));
    }
    let topology = build_layers(&positions, args.radius, args.sink)?;
    print!("{}", topology.to_csv());
    Ok(())
}
