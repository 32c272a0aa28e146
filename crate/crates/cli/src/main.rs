mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{Command, Flags, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "sle-lab",
    version,
    about = "Boundary multifractal spectrum of SLE(kappa, rho): closed forms and Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Closed-form spectrum table over the support of d.
    Spectrum(Flags),
    /// One driver path and the observables of x.
    Simulate(Flags),
    /// One-point moment series over s = 1..s_max.
    Moment(Flags),
    /// Transition density table of the radial-time diffusion.
    Qdiff(Flags),
    /// Covering counts over scales n_min..n_max.
    Boxdim(Flags),
    /// Distortion-bound audit against the extracted trace.
    Audit(Flags),
}

enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<sle_lab::Error> for Failure {
    fn from(e: sle_lab::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn workers(cfg: &RunConfig) -> Result<usize, Failure> {
    match std::env::var("SLE_LAB_THREADS") {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::Validation(format!("SLE_LAB_THREADS: `{v}` is not a thread count"))
        }),
        Err(_) => Ok(cfg.workers),
    }
}

/// Writes every file or none: anything already written is removed when a
/// later write fails.
fn write_all(dir: &PathBuf, files: &[(String, String)]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, body) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(Failure::Io(format!("{}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(())
}

fn execute(command: Command, flags: &Flags) -> Result<(), Failure> {
    let cfg = config::resolve(command, flags).map_err(|e| Failure::Validation(e.0))?;
    let start = Instant::now();
    let params = commands::sle_params(&cfg)?;
    let sp = commands::exponent_params(&cfg, &params)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(&cfg)?)
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    let outcome = pool.install(|| commands::run(&cfg, &params, sp.as_ref()))?;
    let pass = if outcome.criteria.is_empty() {
        Value::Null
    } else {
        Value::Bool(
            outcome
                .criteria
                .values()
                .all(|c| c["pass"] == Value::Bool(true)),
        )
    };
    let summary = json!({
        "command": command.name(),
        "config": cfg,
        "derived": commands::derived(&params, sp.as_ref()),
        "results": outcome.results,
        "criteria": outcome.criteria,
        "pass": pass,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let mut files = outcome.files;
    files.push((
        "summary.json".into(),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    ));
    write_all(&cfg.out_dir, &files)?;
    for (name, _) in &files {
        println!("{}", cfg.out_dir.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Spectrum(f) => (Command::Spectrum, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Moment(f) => (Command::Moment, f),
        Sub::Qdiff(f) => (Command::Qdiff, f),
        Sub::Boxdim(f) => (Command::Boxdim, f),
        Sub::Audit(f) => (Command::Audit, f),
    };
    match execute(command, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
