//! Command-line driver for the capsim simulator.
//!
//! `capsim run` simulates (or, with `--costmodel-only`, predicts) one row per
//! (algorithm, n, P) point and writes CSV, JSON and SVG. `capsim cost`,
//! `capsim ratio`, `capsim balance` and `capsim ell-opt` evaluate the closed
//! forms. `capsim emit-config` prints the JSON equivalent of a set of flags.

pub mod config;
pub mod cost;
pub mod output;
pub mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use capsim::costmodel::{bandwidth_ratio, ell_opt_strassen_25d, hardware_balance};
use clap::{Args, Parser, Subcommand};

pub use config::{Algorithm, Config, Flavor, ScheduleSpec};
pub use run::{run_config, PointResult, Violation};

#[derive(Debug, Parser)]
#[command(name = "capsim", version, about = "Simulate communication-avoiding parallel Strassen and its baselines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a sweep on the simulator (or from the exact ledgers).
    Run(RunArgs),
    /// Print the JSON config equivalent to the given flags.
    EmitConfig(RunArgs),
    /// Evaluate a cost row, optionally swept over P or M.
    Cost(CostArgs),
    /// Ratio of the classical to the Strassen bandwidth lower bound.
    Ratio(RatioArgs),
    /// Whether a machine is compute bound for classical and Strassen.
    Balance(BalanceArgs),
    /// Bandwidth-minimizing Strassen steps before a 2.5D multiply.
    EllOpt(RatioArgs),
}

fn parse_words(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("expected a nonnegative integer, got {s:?}")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub algorithm: Option<Vec<Algorithm>>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long = "P", value_delimiter = ',')]
    pub p: Option<Vec<usize>>,
    /// Words of memory per processor.
    #[arg(long = "M", value_parser = parse_words)]
    pub m: Option<u64>,
    /// String over {B, D}, or "auto".
    #[arg(long)]
    pub schedule: Option<ScheduleSpec>,
    /// DFS steps for strassen-2d.
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub flavor: Option<Flavor>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Full reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Use the exact ledgers instead of simulating.
    #[arg(long)]
    pub costmodel_only: bool,
}

impl RunArgs {
    pub fn resolve(&self) -> anyhow::Result<Config> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = v.clone();
                }
            )*};
        }
        set!(algorithm, n, p, schedule, ell, alpha, beta, gamma, cutoff, flavor, seed);
        if self.m.is_some() {
            c.m = self.m;
        }
        if self.csv.is_some() {
            c.csv = self.csv.clone();
        }
        if self.svg.is_some() {
            c.svg = self.svg.clone();
        }
        if self.json.is_some() {
            c.json = self.json.clone();
        }
        c.costmodel_only |= self.costmodel_only;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    /// Model row (2d, 3d, 2.5d, 2d-strassen, strassen-2d, 2.5d-strassen,
    /// strassen-2.5d, caps, lb-classical, lb-strassen) or caps-um, caps-lm, caps-auto.
    #[arg(long, value_delimiter = ',', required = true)]
    pub row: Vec<cost::CostRow>,
    #[arg(long)]
    pub n: f64,
    #[arg(long = "P")]
    pub p: f64,
    #[arg(long = "M")]
    pub m: Option<f64>,
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long = "sweep-P", value_delimiter = ',', conflicts_with = "sweep_m")]
    pub sweep_p: Option<Vec<f64>>,
    #[arg(long = "sweep-M", value_delimiter = ',')]
    pub sweep_m: Option<Vec<f64>>,
    /// Write the sweep here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RatioArgs {
    #[arg(long)]
    pub n: f64,
    #[arg(long = "P")]
    pub p: f64,
    #[arg(long = "M")]
    pub m: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BalanceArgs {
    #[arg(long, default_value_t = config::XT4_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = config::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long = "M")]
    pub m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_prime: f64,
}

/// Runs the configured sweep and writes every requested output. Returns
/// the CSV text.
pub fn execute(config: &Config) -> anyhow::Result<String> {
    let (_, skipped) = run::points(config);
    for pt in skipped {
        eprintln!(
            "skipping {} at P={}: needs a {}",
            pt.algorithm,
            pt.p,
            if pt.algorithm == Algorithm::Caps {
                "power of 7"
            } else {
                "perfect square"
            }
        );
    }
    let rows = run_config(config)?;
    let text = output::csv_string(&rows)?;
    if let Some(path) = &config.csv {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &config.svg {
        std::fs::write(path, output::svg_plot(&rows))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &config.json {
        std::fs::write(path, output::json_string(&rows))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(text)
}

pub fn dispatch(cli: Cli, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let text = execute(&config)?;
            if config.csv.is_none() {
                stdout.write_all(text.as_bytes())?;
            }
        }
        Command::EmitConfig(args) => {
            writeln!(stdout, "{}", args.resolve()?.to_json())?;
        }
        Command::Cost(a) => {
            let sw = match (&a.sweep_p, &a.sweep_m) {
                (Some(ps), _) => cost::Sweep::P(ps.clone()),
                (_, Some(ms)) => cost::Sweep::M(ms.clone()),
                _ => cost::Sweep::None,
            };
            let rows = cost::sweep(&a.row, a.n, a.p, a.m, a.ell, &sw)?;
            if sw == cost::Sweep::None && a.csv.is_none() {
                let v = if rows.len() == 1 {
                    serde_json::to_string_pretty(&rows[0])?
                } else {
                    serde_json::to_string_pretty(&rows)?
                };
                writeln!(stdout, "{v}")?;
            } else if let Some(path) = &a.csv {
                let f = std::fs::File::create(path)
                    .with_context(|| format!("writing {}", path.display()))?;
                cost::write_cost_csv(f, &rows)?;
            } else {
                cost::write_cost_csv(&mut *stdout, &rows)?;
            }
        }
        Command::Ratio(a) => {
            let (ratio, case) = bandwidth_ratio(a.n, a.p, a.m)?;
            let v = serde_json::json!({ "ratio": ratio, "case": case as u8 });
            writeln!(stdout, "{}", serde_json::to_string_pretty(&v)?)?;
        }
        Command::Balance(a) => {
            let hb = hardware_balance(a.gamma, a.beta, a.m, a.c, a.c_prime);
            writeln!(stdout, "{}", serde_json::to_string_pretty(&hb)?)?;
        }
        Command::EllOpt(a) => {
            let to_int = |v: f64, name: &str| -> anyhow::Result<u64> {
                if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
                    Ok(v as u64)
                } else {
                    anyhow::bail!("{name} must be a positive integer, got {v}")
                }
            };
            let ell = ell_opt_strassen_25d(to_int(a.n, "n")?, to_int(a.p, "P")?, to_int(a.m, "M")?)?;
            writeln!(stdout, "{ell}")?;
        }
    }
    Ok(())
}

/// Exit codes: 0 success, 1 bad input or I/O failure, 2 invariant violation.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut out = std::io::stdout().lock();
    match dispatch(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Violation>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
