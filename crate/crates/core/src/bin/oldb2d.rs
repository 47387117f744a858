use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oldb2d::check::{picard_agreement, run_checks};
use oldb2d::diagnostics::ledger::{apriori_ledger_with_constant, bound_check_series};
use oldb2d::io::timeseries::bound_series_from_rows;
use oldb2d::io::{build_initial, load_config, read_timeseries, write_snapshot, write_timeseries, RunConfig};
use oldb2d::picard::{contraction_estimate, picard_iterate};
use oldb2d::{run, Error, Result, SimState};

#[derive(Parser)]
#[command(name = "oldb2d", version, about = "2D diffusive Oldroyd-B pseudo-spectral solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate to t_end, writing the time series and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the configuration.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Iterate the mild formulation on [0, t0].
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t0: f64,
        /// Also compare the limit with the time stepper.
        #[arg(long)]
        compare: bool,
    },
    /// Run the invariant and property suite.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the a priori bound ledger, and check a stored run against it.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Time series written by `run`.
        #[arg(long)]
        traj: Option<PathBuf>,
    },
}

fn setup(config: &Path) -> Result<(RunConfig, SimState)> {
    let cfg = load_config(config)?;
    let grid = cfg.grid()?;
    let initial = build_initial(&cfg, &grid)?;
    Ok((cfg, initial))
}

fn cmd_run(config: &Path, out_dir: Option<PathBuf>) -> Result<u8> {
    let (cfg, initial) = setup(config)?;
    let dir = out_dir.unwrap_or_else(|| cfg.out_dir.clone());
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let traj = run(&initial, &cfg.params, &cfg.control, &cfg.monitors)?;
    let series = dir.join("timeseries.csv");
    write_timeseries(&traj, &series)?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        write_snapshot(s, &dir.join(format!("snapshot_{i:03}.bin")))?;
    }
    write_snapshot(&traj.final_state, &dir.join("final.bin"))?;
    let last = traj.records.last().expect("a run records its initial state");
    println!(
        "reached t = {} in {} steps; energy {:.6e}, min gamma {:.3e}, min rho {:.3e}",
        traj.final_state.time, traj.steps, last.energy, traj.min_of(|r| r.min_gamma), traj.min_of(|r| r.min_rho)
    );
    println!("wrote {} and {} snapshot(s) to {}", series.display(), traj.snapshots.len() + 1, dir.display());
    Ok(0)
}

fn cmd_picard(config: &Path, t0: f64, compare: bool) -> Result<u8> {
    let (cfg, initial) = setup(config)?;
    let pc = cfg.picard(t0)?;
    let (_, hist) = picard_iterate(&initial.u, &initial.stress, &initial.rho, &cfg.params, &pc)?;
    println!("iter  |dU|_X        |dU|_Y        |dU|_Z        relative      ratio");
    for (i, (d, r)) in hist.differences.iter().zip(&hist.relative).enumerate() {
        let ratio = if i == 0 {
            "-".to_string()
        } else {
            format!("{:.4}", hist.ratios[i - 1])
        };
        println!("{:>4}  {:.6e}  {:.6e}  {:.6e}  {:.6e}  {ratio}", i + 1, d.x, d.y, d.z, r);
    }
    match contraction_estimate(&hist) {
        Ok(c) => println!("contraction estimate {c:.4}"),
        Err(e) => println!("contraction estimate unavailable: {e}"),
    }
    if compare {
        let a = picard_agreement(&initial, &cfg.params, &pc)?;
        println!("relative L2 difference from the time stepper at t0 = {t0}:");
        for (name, v) in &a.fields {
            println!("  {name:<4} {v:.3e}");
        }
    }
    Ok(0)
}

fn cmd_check(config: &Path) -> Result<u8> {
    let cfg = load_config(config)?;
    let report = run_checks(&cfg)?;
    println!("{report}");
    Ok(if report.passed() { 0 } else { 1 })
}

fn cmd_bounds(config: &Path, traj: Option<PathBuf>) -> Result<u8> {
    let (cfg, initial) = setup(config)?;
    let ledger = apriori_ledger_with_constant(&initial, &cfg.params, cfg.control.t_end, cfg.constant_c)?;
    println!("{ledger}");
    let Some(path) = traj else {
        return Ok(0);
    };
    let rows = read_timeseries(&path)?;
    let report = bound_check_series(&bound_series_from_rows(&rows), &ledger);
    println!("{report}");
    Ok(if report.passed() { 0 } else { 1 })
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("OLDB2D_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("OLDB2D_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run { config, out_dir } => cmd_run(&config, out_dir),
        Command::Picard { config, t0, compare } => cmd_picard(&config, t0, compare),
        Command::Check { config } => cmd_check(&config),
        Command::Bounds { config, traj } => cmd_bounds(&config, traj),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

