//! `mmv2v`: run single experiments, sweep parameter grids, or validate a
//! configuration file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmv2v::config::MethodSpec;
use mmv2v::{Error, MetricsBundle, SimConfig};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "mmv2v", version, about = "mmWave V2V highway simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration for one or more seeds.
    Run(RunArgs),
    /// Run the cartesian product of the given parameter lists.
    Sweep(SweepArgs),
    /// Check a configuration without running it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set highway.density_per_km=180`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Association method: waf, pso, mind or asyn; `waf:360` also sets the fixed beamwidth.
    #[arg(long)]
    method: Option<MethodSpec>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output root.
    #[arg(long, env = "MMV2V_OUT", default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    densities: Vec<f64>,
    /// Arrival rates, packets per ms; fractions such as `1/6` are accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_rate)]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    packet_sizes: Vec<f64>,
    /// Scheduling slot lengths, ms.
    #[arg(long, value_delimiter = ',')]
    scheduling_slots: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    methods: Vec<MethodSpec>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, env = "MMV2V_OUT", default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let bad = || format!("`{s}` is not a rate");
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<SimConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => SimConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Failure::Config(format!("{}: {io}", p.display())),
            other => Failure::Config(other.to_string()),
        })?,
        None => SimConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    s.replace('.', "p")
}

/// Directory name for one run, built from the swept parameters.
fn run_name(cfg: &SimConfig) -> String {
    let method = match cfg.method {
        mmv2v::Method::Pso => "pso".to_string(),
        m => format!("{m}-{}", fmt_num(cfg.fixed_beamwidth_deg)),
    };
    format!(
        "{method}_d{}_l{}_p{}_ts{}_s{}",
        fmt_num(cfg.highway.density_per_km),
        fmt_num((cfg.traffic.arrival_rate_per_ms * 1e6).round() / 1e6),
        fmt_num(cfg.traffic.packet_size_bits),
        fmt_num(cfg.scheduling_slot_ms),
        cfg.seed
    )
}

fn execute(cfg: &SimConfig, root: &Path) -> Result<(String, MetricsBundle), Failure> {
    let name = run_name(cfg);
    let dir = root.join(&name);
    let bundle = mmv2v::run(cfg)?;
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string())
        .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    bundle.write_outputs(&dir, &cfg.report)?;
    Ok((name, bundle))
}

fn print_table(rows: &[(String, MetricsBundle)], cfgs: &[SimConfig]) {
    println!(
        "{:<44} {:>12} {:>10} {:>10} {:>9}",
        "run", "mean rate", "mean dly", "success", "paired"
    );
    for ((name, b), cfg) in rows.iter().zip(cfgs) {
        let s = b.summary(&cfg.report);
        println!(
            "{:<44} {:>8.3} Gb/s {:>7.4} ms {:>10.4} {:>9.3}",
            name,
            s.rate_bps.mean / 1e9,
            s.delay_ms.mean,
            s.success_ratio,
            s.pairing_ratio
        );
    }
}

fn run_all(cfgs: Vec<SimConfig>, out: &Path) -> Result<(), Failure> {
    for c in &cfgs {
        c.validate()?;
    }
    let results: Vec<Result<(String, MetricsBundle), Failure>> = cfgs.par_iter().map(|c| execute(c, out)).collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    print_table(&rows, &cfgs);
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let mut base = load(&a.common)?;
    if let Some(m) = a.method {
        base = base.with_method(m);
    }
    let seeds = if a.seed.is_empty() { vec![base.seed] } else { a.seed };
    let cfgs = seeds.into_iter().map(|s| SimConfig { seed: s, ..base.clone() }).collect();
    run_all(cfgs, &a.out)
}

fn axis<T: Clone>(values: &[T], default: T) -> Vec<T> {
    if values.is_empty() {
        vec![default]
    } else {
        values.to_vec()
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let base = load(&a.common)?;
    let methods = axis(
        &a.methods,
        MethodSpec {
            method: base.method,
            beamwidth_deg: None,
        },
    );
    let mut cfgs = Vec::new();
    for &d in &axis(&a.densities, base.highway.density_per_km) {
        for &l in &axis(&a.lambdas, base.traffic.arrival_rate_per_ms) {
            for &p in &axis(&a.packet_sizes, base.traffic.packet_size_bits) {
                for &ts in &axis(&a.scheduling_slots, base.scheduling_slot_ms) {
                    for &m in &methods {
                        for &s in &axis(&a.seeds, base.seed) {
                            let mut c = base.clone().with_method(m);
                            c.highway.density_per_km = d;
                            c.traffic.arrival_rate_per_ms = l;
                            c.traffic.packet_size_bits = p;
                            c.scheduling_slot_ms = ts;
                            c.seed = s;
                            cfgs.push(c);
                        }
                    }
                }
            }
        }
    }
    run_all(cfgs, &a.out)
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    let cfg = load(&a.common)?;
    let mut ok = true;
    for c in cfg.checks() {
        ok &= c.passed;
        let status = if c.passed { "pass" } else { "FAIL" };
        println!("{status}  {:<32} {}", c.name, c.detail);
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Config("configuration has failing checks".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("configuration error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
