//! `reactmp simulate | infer | benchmark`: synthetic data, single runs and
//! timing grids for the LG-SSM, HMM and HGF benchmark models.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use reactmp::bench::{self, Dataset, Grid};
use reactmp::model::config::ModelConfig;
use reactmp::Error;

#[derive(Parser)]
#[command(name = "reactmp", version, about = "Reactive message passing benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset from a benchmark model.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON object with further model parameters; the flags above win.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run inference on a dataset and write a JSON report.
    Infer {
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        /// Sweeps over the graph (per observation for hgf).
        #[arg(long)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
        /// Write every engine emission as one JSON line.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Time every cell of a grid and write a CSV table.
    Benchmark {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Config { path: path.display().to_string(), message: format!("cannot read: {e}") }.into()
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn simulate(model: String, n: usize, seed: u64, config: Option<PathBuf>, out: &Path) -> Result<()> {
    let mut obj = match config {
        Some(p) => match serde_json::from_str(&read_input(&p)?) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(Error::Config { path: p.display().to_string(), message: "expected a JSON object".into() }.into()),
            Err(e) => return Err(Error::Config { path: p.display().to_string(), message: format!("invalid JSON: {e}") }.into()),
        },
        None => Map::new(),
    };
    obj.insert("model".into(), model.into());
    obj.insert("n".into(), n.into());
    obj.insert("seed".into(), seed.into());
    let cfg = ModelConfig::from_value(Value::Object(obj))?;
    let ds = bench::simulate(&cfg)?;
    let mut w = create(out)?;
    w.write_all(ds.to_json().as_bytes())?;
    w.flush()?;
    Ok(())
}

fn infer(model: String, data: &Path, iterations: usize, out: &Path, trace: Option<PathBuf>) -> Result<()> {
    let ds = Dataset::from_json(&read_input(data)?)?;
    if ds.model != model {
        return Err(Error::Config { path: "model".into(), message: format!("{} holds a {} dataset, not {model}", data.display(), ds.model) }.into());
    }
    let sink: Option<Box<dyn Write>> = match trace {
        Some(p) => Some(Box::new(create(&p)?)),
        None => None,
    };
    let run = bench::infer(&ds, iterations, sink)?;
    let mut w = create(out)?;
    serde_json::to_writer_pretty(&mut w, &run.report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn benchmark(grid: &Path, reps: usize, out: &Path) -> Result<()> {
    let grid = Grid::from_json_str(&read_input(grid)?)?;
    let (rows, slopes) = bench::benchmark(&grid, reps)?;
    bench::write_csv(&rows, &slopes, create(out)?)?;
    Ok(())
}

/// 2 for configuration faults, 3 for wiring and rule-table faults, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_wiring() => 3,
        Some(Error::Config { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate { model, n, seed, config, out } => simulate(model, n, seed, config, &out),
        Command::Infer { model, data, iterations, out, trace } => infer(model, &data, iterations, &out, trace),
        Command::Benchmark { grid, reps, out } => benchmark(&grid, reps, &out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let code = |e: Error| exit_code(&anyhow::Error::from(e));
        assert_eq!(code(Error::Config { path: "n".into(), message: "bad".into() }), 2);
        assert_eq!(code(Error::NoRule("x".into())), 3);
        assert_eq!(code(Error::AmbiguousRule("x".into())), 3);
        assert_eq!(code(Error::Wiring("x".into())), 3);
        assert_eq!(code(Error::Numerical("x".into())), 1);
        assert_eq!(exit_code(&anyhow::Error::from(Error::NoRule("x".into())).context("running")), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }
}
