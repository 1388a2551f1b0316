//! `abrsim`: run explicit-rate ABR scenarios, check the two-source
//! convergence model, or print reference shares.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 a checked
//! property was violated.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use abrsim_core::engine::run_scenario;
use abrsim_core::report::{compute_report, max_min_shares};
use abrsim_core::scenario::{self, bundled, Scenario};
use abrsim_core::switch::FairnessOption;
use abrsim_core::trace::write_csv;
use abrsim_core::tubcheck::{run_sweep, SweepConfig};

const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "abrsim",
    version,
    about = "Explicit-rate ABR congestion-avoidance simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report.
    Run(RunArgs),
    /// Sweep the two-source feedback model for band escapes and late
    /// convergence.
    TubCheck(TubCheckArgs),
    /// Print each VC's max-min share of the switch target rates.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    /// Override the scenario's fairness option.
    #[arg(long, value_parser = parse_fairness)]
    option: Option<FairnessOption>,
    /// Turn the BECN option on.
    #[arg(long)]
    becn: bool,
    /// Override the run duration, in microseconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Write the run's trace CSV to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TubCheckArgs {
    /// Number of sampled (utilization, half-width, start point) triples.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Largest sampled band half-width; must stay below 0.5.
    #[arg(long, default_value_t = 0.49)]
    delta_max: f64,
    /// Seed for the sample stream.
    #[arg(long, default_value_t = abrsim_core::tubcheck::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
        Command::TubCheck(args) => tub_check(args),
        Command::Oracle(args) => oracle(args),
    }
}

fn parse_fairness(s: &str) -> Result<FairnessOption, String> {
    match s {
        "basic" => Ok(FairnessOption::Basic),
        "aggressive" => Ok(FairnessOption::Aggressive),
        "precise" => Ok(FairnessOption::Precise),
        other => Err(format!(
            "must be basic, aggressive or precise, got {other:?}"
        )),
    }
}

/// Loads a scenario from a file path, falling back to the bundled set when
/// the argument names one of them and no such file exists.
fn load_scenario(arg: &str) -> Result<Scenario, ExitCode> {
    let text = match fs::read_to_string(arg) {
        Ok(text) => text,
        Err(read_err) => match bundled::named(arg) {
            Some(text) => text.to_string(),
            None => {
                eprintln!("cannot read scenario {arg:?}: {read_err}");
                return Err(ExitCode::from(EXIT_INVALID));
            }
        },
    };
    scenario::parse(&text).map_err(|errors| {
        eprintln!("scenario {arg} is invalid:");
        for issue in &errors.0 {
            eprintln!("  {issue}");
        }
        ExitCode::from(EXIT_INVALID)
    })
}

fn run(args: RunArgs) -> ExitCode {
    let mut scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(option) = args.option {
        scenario.option = option;
    }
    if args.becn {
        scenario.becn = true;
    }
    if let Some(duration) = args.duration {
        if !(duration > 0.0 && duration.is_finite()) {
            eprintln!("--duration must be positive, got {duration}");
            return ExitCode::from(EXIT_INVALID);
        }
        scenario.duration_us = duration;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }

    let output = match run_scenario(&scenario) {
        Ok(output) => output,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    if let Some(path) = &args.trace {
        let result = fs::File::create(path)
            .map(std::io::BufWriter::new)
            .and_then(|mut out| {
                write_csv(&output.records, &mut out)?;
                out.flush()
            });
        if let Err(e) = result {
            eprintln!("cannot write trace {}: {e}", path.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let report = compute_report(&output.records, &scenario, scenario.duration_us);
    print!("{report}");
    let c = output.counters;
    println!(
        "  cells: {} injected, {} delivered, {} rm out, {} rm back, {} becn",
        c.data_cells_injected,
        c.data_cells_delivered,
        c.rm_cells_emitted,
        c.rm_cells_returned,
        c.becn_cells_delivered,
    );
    ExitCode::SUCCESS
}

fn tub_check(args: TubCheckArgs) -> ExitCode {
    let cfg = SweepConfig {
        samples: args.samples,
        half_width_max: args.delta_max,
        seed: args.seed,
        ..SweepConfig::default()
    };
    let report = match run_sweep(&cfg) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("invalid sweep: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    println!(
        "swept {} samples: {} band escapes, {} late convergences, {} fairness escapes",
        report.samples,
        report.band_escapes,
        report.late_or_failed_convergence,
        report.fairness_escapes,
    );
    println!(
        "  worst convergence {} steps (allowance {}), largest imbalance {:.3}",
        report.worst_steps, report.worst_allowance, report.max_imbalance_sampled,
    );
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} violations", report.violations());
        ExitCode::from(EXIT_VIOLATION)
    }
}

fn oracle(args: OracleArgs) -> ExitCode {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let Some(shares) = max_min_shares(&scenario) else {
        eprintln!("scenario has no computable shares");
        return ExitCode::from(EXIT_RUNTIME);
    };
    for (vc, share) in shares {
        println!("{vc},{share}");
    }
    ExitCode::SUCCESS
}
