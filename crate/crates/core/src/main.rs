use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use qbattery::config::load_config;
use qbattery::output::{
    run_outputs, sweep_dir_name, write_discharge_csv, write_metrics_csv, write_summary_csv, RunManifest,
    DISCHARGE_FILE, MANIFEST_FILE, METRICS_FILE, SUMMARY_FILE,
};
use qbattery::protocol::{self, Mode, ProtocolConfig, SweepAxis, Trajectory};
use qbattery::validate::{render_table, run_suite, SuiteOptions};
use qbattery::Error;

/// Worker-pool size for sweeps; defaults to the number of cores.
const WORKERS_ENV: &str = "QBATTERY_WORKERS";

#[derive(Parser)]
#[command(name = "qbattery", version, about = "Open spin-chain quantum battery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one charging or discharging protocol.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one protocol per value of a sweep axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `chain_size` or `noise_strength`
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 0,0.01,0.03
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant suite.
    Validate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Perturb the numerical Hamiltonian so that the suite must fail.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Print the version.
    Version,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(&err))
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config {
        key: WORKERS_ENV.into(),
        reason: format!("expected a positive integer, got `{raw}`"),
    })?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_run(dir: &Path, cfg: &ProtocolConfig, traj: &Trajectory, wall_time_s: f64) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    write_metrics_csv(&dir.join(METRICS_FILE), &traj.records)?;
    if cfg.mode == Mode::Discharging {
        write_discharge_csv(&dir.join(DISCHARGE_FILE), &traj.records)?;
    }
    let mut manifest = RunManifest::new(cfg.clone());
    manifest.wall_time_s = wall_time_s;
    manifest.outputs = run_outputs(cfg);
    manifest.warnings = traj.warnings.clone();
    manifest.summary = protocol::summarize(&traj.records).ok();
    manifest.write(&dir.join(MANIFEST_FILE))
}

fn simulate(config: &Path, out: &Path) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let start = Instant::now();
    let traj = protocol::run(&cfg)?;
    write_run(out, &cfg, &traj, start.elapsed().as_secs_f64())?;
    for w in &traj.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} samples to {}", traj.records.len(), out.display());
    Ok(())
}

fn parse_values(raw: &str) -> Result<Vec<f64>, Error> {
    let values: Vec<f64> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| Error::Config {
                key: "--values".into(),
                reason: format!("`{s}` is not a number"),
            })
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(Error::Config {
            key: "--values".into(),
            reason: "no values given".into(),
        });
    }
    Ok(values)
}

/// `Ok(Some(code))` when the sweep finished but some runs failed.
fn sweep(config: &Path, axis: &str, values: &str, out: &Path) -> Result<Option<u8>, Error> {
    let axis: SweepAxis = axis.parse().map_err(|e: Error| Error::Config {
        key: "--axis".into(),
        reason: e.to_string(),
    })?;
    let values = parse_values(values)?;
    let base = load_config(config)?;
    let start = Instant::now();
    let entries = protocol::sweep(&base, axis, &values)?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out)?;
    let mut first_failure = None;
    for e in &entries {
        match &e.outcome {
            Ok((_, traj)) => {
                let dir = out.join(sweep_dir_name(axis, e.value)?);
                write_run(&dir, &e.config, traj, wall)?;
            }
            Err(err) => {
                eprintln!("run {axis} = {} failed: {err}", e.value);
                first_failure.get_or_insert(exit_code(err));
            }
        }
    }
    write_summary_csv(&out.join(SUMMARY_FILE), &entries)?;
    println!("wrote {} runs and {} to {}", entries.len(), SUMMARY_FILE, out.display());
    Ok(first_failure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        return fail(e);
    }
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => match sweep(&config, &axis, &values, &out) {
            Ok(Some(code)) => return ExitCode::from(code),
            other => other.map(|_| ()),
        },
        Command::Validate { seed, inject_fault } => {
            let outcomes = run_suite(&SuiteOptions { seed, inject_fault });
            print!("{}", render_table(&outcomes));
            return if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
        Command::Version => {
            println!("qbattery {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
