use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kaon_bell::cli::{
    cmd_feasibility, cmd_optimize, cmd_predict, cmd_scan, cmd_simulate, default_format, to_json,
    write_reports_csv, write_scan_csv, ScanAxis, ScanSpec,
};
use kaon_bell::config::{Format, RunConfig};
use kaon_bell::measurement::{OptimizeDomain, Variant};
use kaon_bell::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "kaon-bell",
    version,
    about = "Clauser-Horne Bell tests with entangled neutral kaons"
)]
struct Cli {
    /// Run configuration (JSON). Falls back to the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monte Carlo seed; overrides the configuration.
    #[arg(long, global = true, env = "KAON_BELL_SEED")]
    seed: Option<u64>,
    /// Output file (directory for `simulate`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CH probabilities and ratios for the configured state.
    Predict,
    /// Ratios of both CH variants along one axis.
    Scan {
        #[arg(long, value_enum)]
        axis: ScanAxis,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 201)]
        steps: usize,
        /// Im R for `re-r`, arg R in radians for `abs-r`.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        fixed: f64,
    },
    /// Maximize the CH ratio over R.
    Optimize {
        #[arg(long, value_enum, default_value_t = DomainArg::Real)]
        domain: DomainArg,
        /// Bound on |R|.
        #[arg(long, default_value_t = 2.0)]
        bound: f64,
        #[arg(long, value_enum, default_value_t = VariantArg::First)]
        variant: VariantArg,
    },
    /// Spacelike separation, surviving fraction and lifetime misidentification.
    Feasibility,
    /// Monte Carlo pseudo-experiment; writes counts.csv and report.json.
    Simulate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DomainArg {
    Real,
    Disc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    First,
    Second,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::defaults()),
    }
}

fn emit(out: Option<&Path>, text: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let format = cli.format.unwrap_or_else(|| default_format(Some(&cfg)));
    let out = cli.out.clone().or_else(|| {
        cfg.output
            .as_ref()
            .and_then(|o| o.path.clone())
            .map(PathBuf::from)
    });
    match cli.command {
        Command::Predict => {
            let report = cmd_predict(&cfg)?;
            let text = match format {
                Format::Json => to_json(&report)?.into_bytes(),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_reports_csv(&report.reports, &mut buf)?;
                    buf
                }
            };
            emit(out.as_deref(), &text)
        }
        Command::Scan {
            axis,
            from,
            to,
            steps,
            fixed,
        } => {
            let rows = cmd_scan(
                &cfg,
                &ScanSpec {
                    axis,
                    from,
                    to,
                    steps,
                    fixed,
                },
            )?;
            // tables default to CSV unless JSON was asked for explicitly
            let text = match cli.format {
                Some(Format::Json) => to_json(&rows)?.into_bytes(),
                _ => {
                    let mut buf = Vec::new();
                    write_scan_csv(&rows, &mut buf)?;
                    buf
                }
            };
            emit(out.as_deref(), &text)
        }
        Command::Optimize {
            domain,
            bound,
            variant,
        } => {
            let domain = match domain {
                DomainArg::Real => OptimizeDomain::RealAxis { max_abs: bound },
                DomainArg::Disc => OptimizeDomain::ComplexDisc { radius: bound },
            };
            let variant = match variant {
                VariantArg::First => Variant::First,
                VariantArg::Second => Variant::Second,
            };
            emit(
                out.as_deref(),
                to_json(&cmd_optimize(domain, variant)?)?.as_bytes(),
            )
        }
        Command::Feasibility => emit(out.as_deref(), to_json(&cmd_feasibility(&cfg)?)?.as_bytes()),
        Command::Simulate => {
            let result = cmd_simulate(&cfg, cli.seed)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("simulate-out"));
            let (csv_path, json_path) = result.write_to_dir(&dir)?;
            println!("{}", result.summary_line());
            println!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        1
    } else {
        2
    }
}
