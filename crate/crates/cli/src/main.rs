//! `ductsim` command-line front end.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use log::info;

use ductsim::config::parse_sweep;
use ductsim::engine::{power_grid, run_fp_trace, run_sweep, CombinerChoice, Method, MethodPipeline};
use ductsim::io::{write_fp_trace, write_sweep_tables, RunManifest, RunMetadata};
use ductsim::{Error, SystemConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Sweep,
    FpTrace,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CombinerArg {
    Mrc,
    Mmse,
    Both,
}

impl CombinerArg {
    fn choices(self) -> Vec<CombinerChoice> {
        match self {
            CombinerArg::Mrc => vec![CombinerChoice::Mrc],
            CombinerArg::Mmse => vec![CombinerChoice::Mmse],
            CombinerArg::Both => vec![CombinerChoice::Mrc, CombinerChoice::Mmse],
        }
    }
}

/// Remote-interference link-level simulator.
#[derive(Debug, Parser)]
#[command(name = "ductsim", version)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated methods: no_ri, ignore_ri, null, fp, ri_aware.
    #[arg(long, value_delimiter = ',', default_value = "no_ri,ignore_ri,null,fp")]
    methods: Vec<String>,
    #[arg(long, value_enum, default_value = "mmse")]
    combiner: CombinerArg,
    /// Uplink power grid "start:step:stop" in dBm; overrides the config.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "sweep")]
    mode: Mode,
    /// Hand true duct angles to every consumer instead of root-MUSIC output.
    #[arg(long)]
    true_angles: bool,
    #[arg(long)]
    paper_literal_null_scalar: bool,
    #[arg(long)]
    single_duct_angle: bool,
}

fn resolve(args: &Args) -> Result<(SystemConfig, Vec<Method>), Error> {
    let mut cfg = SystemConfig::from_file(&args.config).map_err(|e| match e {
        Error::Io(io) => Error::config("config", format!("{}: {io}", args.config.display())),
        other => other,
    })?;
    if let Some(s) = &args.sweep {
        parse_sweep(s)?;
        cfg.ul_sweep_dbm = Some(s.clone());
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.rng_seed = s;
    }
    cfg.true_angles |= args.true_angles;
    cfg.paper_literal_null_scalar |= args.paper_literal_null_scalar;
    cfg.single_duct_angle |= args.single_duct_angle;
    cfg.validate()?;
    let methods = args.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?;
    Ok((cfg, methods))
}

fn run(args: &Args, cfg: &SystemConfig, methods: &[Method]) -> Result<(), Error> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    std::fs::create_dir_all(&args.out)?;
    let combiners = args.combiner.choices();
    let grid = power_grid(cfg)?;
    let mut files: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mode = match args.mode {
        Mode::Sweep => {
            let pipelines: Vec<MethodPipeline> = methods
                .iter()
                .flat_map(|&method| combiners.iter().map(move |&combiner| MethodPipeline { method, combiner }))
                .collect();
            info!("sweep: {} pipelines x {} points x {} trials", pipelines.len(), grid.len(), cfg.trials);
            let result = run_sweep(cfg, &pipelines, &grid, cfg.trials)?;
            let paths = write_sweep_tables(&args.out, &result.rows)?;
            for m in methods {
                files.insert(m.name().into(), paths.iter().map(|p| p.display().to_string()).collect());
            }
            "sweep"
        }
        Mode::FpTrace => {
            let trace = run_fp_trace(cfg, grid[0], combiners[0], cfg.trials)?;
            let path = write_fp_trace(&args.out, &trace)?;
            files.insert(Method::Fp.name().into(), vec![path.display().to_string()]);
            "fp-trace"
        }
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        mode: mode.into(),
        seed: cfg.rng_seed,
        trials: cfg.trials,
        methods: methods.iter().map(|m| m.name().to_string()).collect(),
        combiners: combiners.iter().map(|c| c.name().to_string()).collect(),
        p_ul_grid_dbm: grid,
        config: cfg.resolved(),
        started_unix_s,
        wall_clock_s: started.elapsed().as_secs_f64(),
        files,
        metadata: RunMetadata::for_config(cfg),
    };
    manifest.write(&args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let (cfg, methods) = match resolve(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_config() { 2 } else { 1 });
        }
    };
    match run(&args, &cfg, &methods) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
