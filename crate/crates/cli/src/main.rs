use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use shelfprop::link::{coverage_stats, CoverageStats, LinkError};
use shelfprop::pathfinder::PathError;
use shelfprop::report::{self, ReportError, RunReport, HEATMAP_MAX_DBM, HEATMAP_MIN_DBM};
use shelfprop::scenario::{build_preset, parse_scenario, serialize_scenario, ScenarioError, ScenarioSpec};
use shelfprop::validate::{run_suites, Suite};
use shelfprop::Execution;

const EXIT_VALIDATION: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_ORACLE: u8 = 4;

const SCENARIO_FILE: &str = "scenario.toml";
const MAP_FILE: &str = "map.csv";
const HEATMAP_FILE: &str = "heatmap.ppm";
const STATS_FILE: &str = "stats.json";
const REPORT_FILE: &str = "report.json";

/// Ray-traced UWB coverage maps for metal-shelf warehouses.
#[derive(Parser)]
#[command(name = "shelfprop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the map, heatmap, statistics and report.
    Run(RunArgs),
    /// Compare two run directories cell by cell (A minus B).
    Compare(CompareArgs),
    /// Run built-in oracle suites.
    Validate(ValidateArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    preset: Option<String>,
    /// Scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    grid_spacing: Option<f64>,
    #[arg(long)]
    tessellation_order: Option<u32>,
    #[arg(long)]
    max_reflections: Option<u32>,
    #[arg(long)]
    diffraction: Option<Switch>,
    #[arg(long)]
    freq_samples: Option<usize>,
    /// Upper bound on worker threads; output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directory A.
    a: PathBuf,
    /// Run directory B.
    b: PathBuf,
    /// Write the per-cell delta map (CSV) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Suite name, or `all`.
    #[arg(default_value = "all")]
    suite: String,
}

fn load_spec(args: &RunArgs) -> Result<ScenarioSpec> {
    let mut spec = match (&args.preset, &args.scenario) {
        (Some(name), _) => build_preset(name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_scenario(&text)?
        }
        (None, None) => bail!("either --preset or --scenario is required"),
    };
    if let Some(s) = args.grid_spacing {
        spec.rx.grid.spacing = s;
    }
    if let Some(k) = args.tessellation_order {
        spec.engine.tessellation_order = k;
    }
    if let Some(n) = args.max_reflections {
        spec.engine.max_reflections = n;
    }
    if let Some(d) = args.diffraction {
        spec.engine.enable_diffraction = matches!(d, Switch::On);
    }
    if let Some(n) = args.freq_samples {
        spec.band.n_freq_samples = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<String> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.display().to_string())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let spec = load_spec(args)?;
    let sim = spec.build()?;
    let map = sim.run(Execution::from_workers(args.workers))?;
    let stats = coverage_stats(&map, &sim.budget, sim.tx.position);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let outputs = vec![
        write(&args.out, SCENARIO_FILE, serialize_scenario(&spec))?,
        write(&args.out, MAP_FILE, report::write_csv(&map, &sim.budget))?,
        write(&args.out, HEATMAP_FILE, report::heatmap_ppm(&map, HEATMAP_MIN_DBM, HEATMAP_MAX_DBM))?,
        write(&args.out, STATS_FILE, serde_json::to_string_pretty(&stats)? + "\n")?,
    ];
    let run = RunReport {
        scenario_hash: sim.scenario_hash.clone(),
        engine: sim.engine,
        n_freq_samples: sim.band.n_freq_samples,
        grid_points: map.values.len(),
        stats: stats.clone(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    write(&args.out, REPORT_FILE, serde_json::to_string_pretty(&run)? + "\n")?;
    println!(
        "{}: covered {:.4} of {} reachable points, reliable range {:.2} m, {} blind spots ({:.1} s)",
        if spec.name.is_empty() { "scenario" } else { &spec.name },
        stats.covered_fraction,
        stats.reachable_points,
        stats.reliable_range_m,
        stats.blind_spots,
        run.wall_clock_s
    );
    Ok(())
}

fn read_run(dir: &Path) -> Result<(Vec<report::CsvRow>, CoverageStats)> {
    let csv_path = dir.join(MAP_FILE);
    let csv = fs::read_to_string(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let rows = report::read_csv(&csv).with_context(|| format!("parsing {}", csv_path.display()))?;
    let stats_path = dir.join(STATS_FILE);
    let stats = fs::read_to_string(&stats_path).with_context(|| format!("reading {}", stats_path.display()))?;
    let stats = serde_json::from_str(&stats).with_context(|| format!("parsing {}", stats_path.display()))?;
    Ok((rows, stats))
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let (a_rows, a_stats) = read_run(&args.a)?;
    let (b_rows, b_stats) = read_run(&args.b)?;
    let c = report::compare(&a_rows, &a_stats, &b_rows, &b_stats)?;
    if let Some(out) = &args.out {
        fs::write(out, report::write_delta_csv(&a_rows, &c)).with_context(|| format!("writing {}", out.display()))?;
    }
    println!("{}", serde_json::to_string_pretty(&c)?);
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let suites = if args.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![args.suite.parse::<Suite>().map_err(anyhow::Error::msg)?]
    };
    let checks = run_suites(&suites);
    for c in &checks {
        println!(
            "{} {:<16} {:<48} measured {:<14.6e} expected {:<14.6e} tol {:.1e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.measured,
            c.expected,
            c.tolerance
        );
    }
    Ok(checks.iter().all(|c| c.pass))
}

/// Maps an error to the documented exit code.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(s) = cause.downcast_ref::<ScenarioError>() {
            eprintln!("error code: {}", s.code());
            return EXIT_VALIDATION;
        }
        if let Some(l) = cause.downcast_ref::<LinkError>() {
            return match l {
                LinkError::Path(PathError::Budget { .. }) => EXIT_BUDGET,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<ReportError>().is_some() {
            return EXIT_VALIDATION;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate(a) => match cmd_validate(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_ORACLE),
            Err(e) => Err(e),
        },
        Command::Presets => {
            for p in shelfprop::scenario::PRESETS {
                println!("{p}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
