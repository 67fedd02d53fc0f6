//! Command-line frontend for the zonal electricity-price volatility study.
//!
//! Four subcommands share one flag set (`--config`, `--out`, `--seed`,
//! `--zones`, `--t0`): `run` executes the full per-zone pipeline, `simulate`
//! renders a synthetic dataset in the canonical CSV schemas, and `acf` and
//! `rollvar` emit quick data diagnostics without fitting anything.
//!
//! Configuration lives in a TOML file; command-line flags override file
//! values. Exit codes: 0 success, 1 when some zones failed while others
//! succeeded, 2 for configuration or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pricevol::io::{read_hourly_csv, write_daily_csv};
use pricevol::models::SmootherSettings;
use pricevol::pipeline::{
    default_t0_date, run_study, write_lag_csv, write_synthetic_dataset, zone_daily_prices,
    RunConfig, SimDatasetConfig, SimZone, ACF_MAX_LAG, DEFAULT_MIN_HOURS, ROLLING_WINDOW_DAYS,
};
use pricevol::series::{acf, rolling_variance};

#[derive(Parser)]
#[command(
    name = "pricevol",
    version,
    about = "Estimates daily electricity-price dynamics and the volatility \
             impact of a dated market intervention, zone by zone"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full study for every configured zone and write reports
    Run(CommonOpts),
    /// Generate a synthetic dataset in the canonical CSV schemas
    Simulate(CommonOpts),
    /// Write the raw daily-price autocorrelation per zone
    Acf(CommonOpts),
    /// Write the rolling variance of daily prices per zone
    Rollvar(CommonOpts),
}

#[derive(Args)]
struct CommonOpts {
    /// TOML configuration file; flags below override its values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random seed (consumed by `simulate`; fits are deterministic)
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,

    /// Comma-separated zone list
    #[arg(long, value_name = "ZONES", value_delimiter = ',')]
    zones: Option<Vec<String>>,

    /// Intervention activation date (ISO, e.g. 2016-05-28)
    #[arg(long, value_name = "DATE")]
    t0: Option<NaiveDate>,
}

/// The study config file. Dates are quoted ISO strings; every key can be
/// omitted and supplied (or overridden) on the command line where a flag
/// exists.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    zones: Option<Vec<String>>,
    start_date: Option<NaiveDate>,
    end_date: Option<NaiveDate>,
    t0_date: Option<NaiveDate>,
    /// Hourly price CSV covering all zones.
    prices: Option<PathBuf>,
    /// Daily renewables CSV; `{zone}` expands per zone.
    res: Option<PathBuf>,
    /// Holiday calendar; omitted, the built-in fixed-date list applies.
    holidays: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    min_hours_per_day: Option<usize>,
    smoother: Option<SmootherSettings>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(opts) => cmd_run(opts),
        Command::Simulate(opts) => cmd_simulate(opts),
        Command::Acf(opts) => cmd_diagnostic(opts, Diagnostic::Acf),
        Command::Rollvar(opts) => cmd_diagnostic(opts, Diagnostic::RollingVariance),
    }
}

/// Anchors a path from the config file next to the file itself, so a config
/// can be invoked from any working directory.
fn anchor(base: Option<&Path>, path: PathBuf) -> PathBuf {
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

fn load_run_config(opts: &CommonOpts) -> Result<RunConfig> {
    let (file, base) = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            let parsed: FileConfig = toml::from_str(&text)
                .with_context(|| format!("cannot parse config {}", path.display()))?;
            (parsed, path.parent().map(Path::to_path_buf))
        }
        None => (FileConfig::default(), None),
    };
    let base = base.as_deref();

    let zones = opts
        .zones
        .clone()
        .or(file.zones)
        .ok_or_else(|| anyhow!("no zones given: set `zones` in the config or pass --zones"))?;
    let start_date = file
        .start_date
        .ok_or_else(|| anyhow!("config key `start_date` is required"))?;
    let end_date = file
        .end_date
        .ok_or_else(|| anyhow!("config key `end_date` is required"))?;
    let prices_path = file
        .prices
        .map(|p| anchor(base, p))
        .ok_or_else(|| anyhow!("config key `prices` is required"))?;
    let res_path = file
        .res
        .map(|p| anchor(base, p))
        .ok_or_else(|| anyhow!("config key `res` is required"))?;

    let config = RunConfig {
        zones,
        start_date,
        end_date,
        t0_date: opts.t0.or(file.t0_date).unwrap_or_else(default_t0_date),
        prices_path,
        res_path,
        holidays_path: file.holidays.map(|p| anchor(base, p)),
        min_hours_per_day: file.min_hours_per_day.unwrap_or(DEFAULT_MIN_HOURS),
        smoother: file.smoother.unwrap_or_default(),
        out_dir: opts
            .out
            .clone()
            .or_else(|| file.out_dir.map(|p| anchor(base, p)))
            .unwrap_or_else(|| PathBuf::from("out")),
        seed: opts.seed.or(file.seed).unwrap_or(0),
    };
    config.validate()?;
    Ok(config)
}

fn cmd_run(opts: CommonOpts) -> Result<ExitCode> {
    let config = load_run_config(&opts)?;
    let outcome = run_study(&config)?;
    for zone in &outcome.zones {
        match &zone.result {
            Ok(_) => println!("zone {}: ok", zone.zone),
            Err(err) => println!("zone {}: FAILED: {err}", zone.zone),
        }
    }
    println!(
        "summary: {} ({} ok, {} failed)",
        outcome.summary_path.display(),
        outcome.zones.len() - outcome.n_failed(),
        outcome.n_failed()
    );
    Ok(if outcome.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_simulate(opts: CommonOpts) -> Result<ExitCode> {
    let mut config = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read spec {}", path.display()))?;
            toml::from_str::<SimDatasetConfig>(&text)
                .with_context(|| format!("cannot parse spec {}", path.display()))?
        }
        None => SimDatasetConfig::default(),
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(t0) = opts.t0 {
        config.t0_date = t0;
    }
    if let Some(names) = &opts.zones {
        let chosen: Result<Vec<SimZone>> = names
            .iter()
            .map(|name| {
                config
                    .zones
                    .iter()
                    .find(|z| &z.name == name)
                    .cloned()
                    .ok_or_else(|| anyhow!("zone `{name}` is not in the simulation spec"))
            })
            .collect();
        config.zones = chosen?;
    }
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("simdata"));

    let manifest = write_synthetic_dataset(&config, &dir)?;
    println!("prices:   {}", manifest.prices_path.display());
    println!("res:      {}", manifest.res_path_template.display());
    println!("holidays: {}", manifest.holidays_path.display());
    for path in &manifest.truth_paths {
        println!("truth:    {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

enum Diagnostic {
    Acf,
    RollingVariance,
}

fn cmd_diagnostic(opts: CommonOpts, which: Diagnostic) -> Result<ExitCode> {
    let config = load_run_config(&opts)?;
    let rows = read_hourly_csv(&config.prices_path)?;
    fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("cannot create {}", config.out_dir.display()))?;

    let mut failed = 0usize;
    for zone in &config.zones {
        let written = (|| -> pricevol::Result<PathBuf> {
            let prices = zone_daily_prices(&config, &rows, zone)?;
            match which {
                Diagnostic::Acf => {
                    let rho = acf(&prices, ACF_MAX_LAG)?;
                    let path = config.out_dir.join(format!("acf_raw_{zone}.csv"));
                    write_lag_csv(&path, &rho)?;
                    Ok(path)
                }
                Diagnostic::RollingVariance => {
                    let rv = rolling_variance(&prices, ROLLING_WINDOW_DAYS)?;
                    let path = config.out_dir.join(format!("rolling_variance_{zone}.csv"));
                    write_daily_csv(&path, &rv)?;
                    Ok(path)
                }
            }
        })();
        match written {
            Ok(path) => println!("zone {zone}: {}", path.display()),
            Err(err) => {
                failed += 1;
                println!("zone {zone}: FAILED: {err}");
            }
        }
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
