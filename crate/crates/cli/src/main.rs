use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use circulator_core::config::parse_number;
use circulator_core::experiments::{
    export, parse_arms, run_sweep_with, structural_scattering_probe, Experiment, Format, SweepResult, SweepSpec,
};
use circulator_core::{derive_trial_seed, run_with, ChannelSet, RunOptions, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "circulator",
    version,
    about = "Full-duplex circulator simulator and optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sum-rate versus the number of surface elements.
    Elements(SweepArgs),
    /// Sum-rate while one user moves across the half-plane.
    MovingUser(SweepArgs),
    /// Sum-rate versus group size.
    GroupSize(SweepArgs),
    /// Sum-rate versus antennas per user.
    Antennas(SweepArgs),
    /// Sum-rate versus the number of users.
    Users(SweepArgs),
    /// Per-user rates over a grid of rate weights.
    RateRegion(SweepArgs),
    /// Impinging and reflected beampatterns of the optimized surface.
    Beampatterns(SweepArgs),
    /// Received power from unintended transmitters.
    SecurityPower(SweepArgs),
    /// Objective and constraint-gap traces.
    Convergence(SweepArgs),
    /// Single optimization run; prints the report as JSON.
    Run(RunArgs),
    /// Structural-scattering amplitude of two line-of-sight users.
    Probe(ProbeArgs),
    /// Prints the resolved configuration.
    Config(CommonArgs),
    /// Writes the channel realization of one trial as text.
    DumpChannels(DumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Configuration file (`key = value` lines or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    structural_scattering: Option<Toggle>,
    #[arg(long, value_enum)]
    direct_links: Option<Toggle>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Comma-separated arms: nr, r, d, g<size>-nr, g<size>-r.
    #[arg(long)]
    arms: Option<String>,
    /// Comma-separated swept values.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutFormat,
    /// Weight-grid step for the rate region.
    #[arg(long, default_value_t = 0.1)]
    weight_step: f64,
    /// Index (1-based) of the user that moves in the moving-user sweep.
    #[arg(long)]
    moving_user: Option<usize>,
    /// Fail on any violated invariant instead of warning.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    strict: bool,
    /// Include per-iteration scattering traces.
    #[arg(long)]
    pdd_rows: bool,
}

#[derive(Args)]
struct ProbeArgs {
    /// Two angles in degrees, comma-separated.
    #[arg(long)]
    angles: String,
    #[arg(long)]
    elements: usize,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(a: &CommonArgs) -> Result<ScenarioConfig> {
    let mut c = match &a.config {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("override `{o}` is not key=value"))?;
        c.set(k.trim(), v.trim())?;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(t) = a.trials {
        c.trials = t;
    }
    if let Some(t) = a.structural_scattering {
        c.structural_scattering = matches!(t, Toggle::On);
    }
    if let Some(t) = a.direct_links {
        c.direct_links = matches!(t, Toggle::On);
    }
    Ok(c)
}

fn sweep(experiment: Experiment, a: SweepArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    cfg.validate().context("invalid configuration")?;
    let mut spec = SweepSpec::new(experiment, &cfg);
    if let Some(t) = a.common.trials {
        spec.trials = t;
    }
    if let Some(arms) = &a.arms {
        spec.arms = parse_arms(arms)?;
    }
    if let Some(list) = &a.sweep {
        spec.swept_values = list
            .split(',')
            .map(|v| parse_number(v).map_err(anyhow::Error::msg))
            .collect::<Result<_>>()?;
    }
    spec.weight_step = a.weight_step;
    if let Some(u) = a.moving_user {
        if u == 0 {
            bail!("--moving-user is 1-based");
        }
        spec.moving_user = Some(u - 1);
    }
    info!("running {} sweep with {} trials", experiment, spec.trials);
    let result = run_sweep_with(&spec, &cfg, a.strict)?;
    let format = match a.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let files = export(&result, format, &a.out)?;
    print_summary(&result);
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn print_summary(r: &SweepResult) {
    let sums = r.weighted_sums();
    for (a, arm) in r.spec.arms.iter().enumerate() {
        for (v, value) in r.points.iter().enumerate() {
            let xs = &sums[a][v];
            let m = circulator_core::stats::mean(xs);
            let se = circulator_core::stats::std_err(xs);
            println!("{:<8} {:>8} {:>10.4} ± {:.4}", arm.label(), value, m, se);
        }
    }
}

fn run_one(a: RunArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let sc = cfg.validate().context("invalid configuration")?;
    let ch = ChannelSet::sample(&sc, derive_trial_seed(sc.config.seed, a.trial))?;
    let opts = RunOptions {
        strict: a.strict,
        keep_pdd_rows: a.pdd_rows,
    };
    let out = run_with(&sc, &ch, &opts)?;
    println!("{}", serde_json::to_string_pretty(&out.report)?);
    Ok(())
}

fn probe(a: ProbeArgs) -> Result<()> {
    let v: Vec<f64> = a
        .angles
        .split(',')
        .map(|x| parse_number(x).map_err(anyhow::Error::msg))
        .collect::<Result<_>>()?;
    if v.len() != 2 {
        bail!("--angles expects two values");
    }
    let amp = structural_scattering_probe(v[0].to_radians(), v[1].to_radians(), a.elements);
    println!("{amp}");
    Ok(())
}

fn dump(a: DumpArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let sc = cfg.validate().context("invalid configuration")?;
    let ch = ChannelSet::sample(&sc, derive_trial_seed(sc.config.seed, a.trial))?;
    let text = ch.to_dump();
    match a.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Elements(a) => sweep(Experiment::Elements, a),
        Command::MovingUser(a) => sweep(Experiment::MovingUser, a),
        Command::GroupSize(a) => sweep(Experiment::GroupSize, a),
        Command::Antennas(a) => sweep(Experiment::Antennas, a),
        Command::Users(a) => sweep(Experiment::Users, a),
        Command::RateRegion(a) => sweep(Experiment::RateRegion, a),
        Command::Beampatterns(a) => sweep(Experiment::Beampatterns, a),
        Command::SecurityPower(a) => sweep(Experiment::SecurityPower, a),
        Command::Convergence(a) => sweep(Experiment::Convergence, a),
        Command::Run(a) => run_one(a),
        Command::Probe(a) => probe(a),
        Command::Config(a) => load_config(&a).and_then(|c| {
            let sc = c.validate()?;
            print!("{}", sc.config.to_kv_string());
            Ok(())
        }),
        Command::DumpChannels(a) => dump(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
