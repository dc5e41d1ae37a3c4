//! The `migrate` command line.
//!
//! Exit codes: 0 on success, 1 for invalid input (usage, parse, validation
//! and I/O errors), 2 when a size or iteration limit is hit.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use crate::colgen::PricingMode;
use crate::error::{MigrateError, Result};
use crate::instance::{eunetworks, generate_instance, load_instance, GeneratorConfig, Topology};
use crate::lbbd::{run, LbbdConfig, SolveReport};
use crate::oracle::{solve_exact, OracleLimits};
use crate::report::{summarize, CSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "migrate", version, about = "Plan circuit migrations across maintenance windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Pricing {
    Ordered,
    Hybrid,
    General,
}

impl From<Pricing> for PricingMode {
    fn from(p: Pricing) -> PricingMode {
        match p {
            Pricing::Ordered => PricingMode::Ordered,
            Pricing::Hybrid => PricingMode::Hybrid,
            Pricing::General => PricingMode::General,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a benchmark instance on a topology.
    Generate {
        /// Topology JSON (sites with km coordinates and edges); defaults to the bundled EUNetworks skeleton.
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        mu: f64,
        #[arg(long, default_value_t = 2.5)]
        sigma: f64,
        #[arg(long, default_value_t = 3)]
        windows: u32,
        #[arg(long, default_value_t = 30)]
        eta_cir: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance and write the solution JSON and a CSV report row.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Solution file; defaults to `<instance>.solution.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV report file; the row is printed to stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.10)]
        gap: f64,
        /// Seconds.
        #[arg(long, default_value_t = 10800.0)]
        time_limit: f64,
        #[arg(long)]
        no_propagate: bool,
        #[arg(long, value_enum, default_value_t = Pricing::Hybrid)]
        pricing: Pricing,
        /// Discard generated columns after every window solve.
        #[arg(long)]
        drop_columns: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a tiny instance exactly by exhaustive search.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        /// `sites,circuits,windows,technicians` caps.
        #[arg(long, default_value = "6,6,2,2")]
        oracle_limits: LimitsArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the CSV report from a solution file.
    Report {
        solution: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy)]
struct LimitsArg(OracleLimits);

impl FromStr for LimitsArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err("expected four comma-separated values: sites,circuits,windows,technicians".into());
        }
        let num = |i: usize| parts[i].parse::<u64>().map_err(|e| format!("{}: {e}", parts[i]));
        Ok(LimitsArg(OracleLimits {
            max_sites: num(0)? as usize,
            max_circuits: num(1)?,
            max_windows: num(2)? as usize,
            max_tech: num(3)? as u32,
        }))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> MigrateError {
    MigrateError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text(solution: &SolveReport) -> String {
    format!("{CSV_HEADER}\n{}\n", summarize(solution).csv_row())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            topology,
            mu,
            sigma,
            windows,
            eta_cir,
            seed,
            out,
        } => {
            let topo: Topology = match topology {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
                    serde_json::from_str(&text)?
                }
                None => eunetworks(),
            };
            if topo.sites.len() < 2 {
                return Err(MigrateError::Validation("topology needs at least two sites".into()));
            }
            if !(mu > 0.0 && sigma > 0.0) {
                return Err(MigrateError::Validation("mu and sigma must be positive".into()));
            }
            let cfg = GeneratorConfig {
                mu,
                sigma,
                windows,
                eta_cir,
                seed,
                ..GeneratorConfig::default()
            };
            let inst = generate_instance(&topo, &cfg);
            inst.validate()?;
            write_out(out.as_deref(), &inst.to_json())
        }
        Command::Solve {
            instance,
            out,
            csv,
            gap,
            time_limit,
            no_propagate,
            pricing,
            drop_columns,
            seed,
        } => {
            if !(0.0..1.0).contains(&gap) {
                return Err(MigrateError::Validation(format!("gap {gap} outside [0, 1)")));
            }
            let inst = load_instance(&instance)?;
            let config = LbbdConfig {
                target_gap: gap,
                time_limit_s: time_limit,
                propagate: !no_propagate,
                pricing_mode: pricing.into(),
                keep_columns: !drop_columns,
                seed,
                ..LbbdConfig::default()
            };
            let solution = run(&inst, &config)?;
            log::info!(
                "{}: {:?}, cost {:?}, bound {}, {} iterations",
                solution.instance,
                solution.status,
                solution.upper_bound_cents,
                solution.lower_bound_cents,
                solution.iterations
            );
            let out = out.unwrap_or_else(|| instance.with_extension("solution.json"));
            let mut json = serde_json::to_string_pretty(&solution)?;
            json.push('\n');
            std::fs::write(&out, json).map_err(|e| io_err(&out, e))?;
            write_out(csv.as_deref(), &csv_text(&solution))
        }
        Command::Oracle {
            instance,
            oracle_limits,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let result = solve_exact(&inst, &oracle_limits.0)?;
            let mut json = serde_json::to_string_pretty(&result)?;
            json.push('\n');
            write_out(out.as_deref(), &json)
        }
        Command::Report { solution, out } => {
            let text = std::fs::read_to_string(&solution).map_err(|e| io_err(&solution, e))?;
            let parsed: SolveReport = serde_json::from_str(&text)?;
            write_out(out.as_deref(), &csv_text(&parsed))
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("MIGRATE_LOG")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("migrate: {e}");
            if e.is_limit() {
                2
            } else {
                1
            }
        }
    }
}
