use capillary::report::RunReport;
use capillary::runner::{run_scenario, Filter, RunOptions};
use capillary::scenario::{Scenario, ScenarioError};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical verification kernel for capillary hypersurfaces in balls in
/// space forms: identity suites, stability spectra, and HKR checks driven by
/// TOML scenarios.
#[derive(Parser)]
#[command(name = "capillary", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json / report.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override refinement levels, comma-separated (e.g. "1,2,3").
    #[arg(long)]
    levels: Option<String>,
    /// Override the default tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (0 = all cores); env CAPILLARY_JOBS also applies.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every check in the scenario.
    Verify(Common),
    /// Run only spectrum / pairing checks.
    Spectrum(Common),
    /// Run only HKR / volume / radial checks.
    Hkr(Common),
    /// Expand the [sweep] axes (contact angles) and run every check.
    Sweep(Common),
    /// Convergence study: force the level ladder and emit per-level CSV.
    Convergence(Common),
}

fn parse_levels(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad level {s:?}: {e}")))
        .collect()
}

fn options(common: &Common, filter: Filter) -> Result<RunOptions, String> {
    let jobs = match common.jobs {
        Some(j) => j,
        None => std::env::var("CAPILLARY_JOBS")
            .ok()
            .map(|v| v.parse::<usize>().map_err(|e| format!("CAPILLARY_JOBS: {e}")))
            .transpose()?
            .unwrap_or(0),
    };
    Ok(RunOptions {
        seed: common.seed,
        levels: common.levels.as_deref().map(parse_levels).transpose()?,
        tol: common.tol,
        jobs,
        filter,
    })
}

fn run(common: &Common, filter: Filter, sweep: bool, convergence: bool) -> ExitCode {
    let scenario = match Scenario::load(&common.config) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let scenario = if sweep {
        match scenario.expand_sweep() {
            Ok(s) => s,
            Err(e) => return config_error(e),
        }
    } else {
        scenario
    };
    let mut opts = match options(common, filter) {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if convergence && opts.levels.is_none() {
        opts.levels = Some(vec![0, 1, 2, 3]);
    }
    let report = match run_scenario(&scenario, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print_summary(&report);
    if let Err(e) = report.emit(&common.out) {
        eprintln!("error: cannot write report to {}: {e}", common.out.display());
        return ExitCode::from(2);
    }
    if report.overall_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn config_error(e: ScenarioError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn print_summary(report: &RunReport) {
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        let residual = c
            .residual
            .map(|r| format!("{r:.3e}"))
            .unwrap_or_else(|| "-".into());
        let note = c.error.as_deref().unwrap_or("");
        println!(
            "{status} {:<40} residual={residual:>10} ({:.1} ms) {note}",
            c.id, c.wall_clock_ms
        );
    }
    println!(
        "{} / {} checks passed (scenario {})",
        report.passed,
        report.total,
        &report.scenario_hash[..12]
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Verify(c) => run(c, Filter::All, false, false),
        Cmd::Spectrum(c) => run(c, Filter::SpectrumOnly, false, false),
        Cmd::Hkr(c) => run(c, Filter::HkrOnly, false, false),
        Cmd::Sweep(c) => run(c, Filter::All, true, false),
        Cmd::Convergence(c) => run(c, Filter::All, false, true),
    }
}
