//! `focal-selfcal` command-line tool.
//!
//! Exit codes: 0 ok, 1 input error, 2 insufficient data, 3 method failure.

mod bench;
mod calibrate;
mod estimate;
mod summary;

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// A failed command: message for stderr and the exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn insufficient(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn method(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "focal-selfcal", version, about = "Focal length self-calibration from two views")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robust fundamental matrix from a correspondence CSV.
    EstimateF(estimate::Args),
    /// Focal lengths and principal points from a fundamental matrix.
    Calibrate(calibrate::Args),
    /// Synthetic experiment sweeps written as CSV.
    SynthBench(bench::Args),
    /// mAA and median summaries of sweep CSVs or record JSON.
    Metrics(summary::Args),
}

/// `u,v` or `WxH`-style pairs.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .or_else(|| s.split_once('x'))
        .ok_or_else(|| format!("expected two numbers like 320,240, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("not a finite number: {t:?}"));
    Ok((num(a)?, num(b)?))
}

/// Reads a file, or stdin for `-`.
pub fn open_input(path: &Path) -> Result<Box<dyn Read>, Failure> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin()));
    }
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Writes `bytes` to a file, or stdout when no path is given.
pub fn write_output(path: Option<&PathBuf>, bytes: &[u8]) -> CmdResult {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(bytes).map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("plain data serializes");
    out.push(b'\n');
    out
}

fn configure_threads() -> CmdResult {
    let Ok(raw) = std::env::var("FOCAL_SELFCAL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::input(format!("FOCAL_SELFCAL_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    match cli.command {
        Command::EstimateF(a) => estimate::run(a),
        Command::Calibrate(a) => calibrate::run(a),
        Command::SynthBench(a) => bench::run(a),
        Command::Metrics(a) => summary::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
