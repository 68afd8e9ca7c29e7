use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use super::{infer, simulate};
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

/// Benchmark cells. The JSON form is either an array of model configs or
/// `{"base": config, "n": [...], "iterations": [...]}`, which expands to the
/// product of both lists (each defaulting to the base value).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub cells: Vec<ModelConfig>,
}

impl Grid {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| config_err("", format!("invalid JSON: {e}")))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let cells = match v {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, c)| ModelConfig::from_value(c.clone()).map_err(|e| prefix(e, &format!("[{i}]"))))
                .collect::<Result<Vec<_>>>()?,
            Value::Object(obj) => {
                if let Some(k) = obj.keys().find(|k| !["base", "n", "iterations"].contains(&k.as_str())) {
                    return Err(config_err(k.clone(), "unknown field; expected base, n or iterations"));
                }
                let base = obj.get("base").ok_or_else(|| config_err("base", "missing field"))?;
                let base = ModelConfig::from_value(base.clone()).map_err(|e| prefix(e, "base"))?;
                let ns = list(obj.get("n"), "n")?.unwrap_or_else(|| vec![base.n()]);
                let ks = list(obj.get("iterations"), "iterations")?.unwrap_or_else(|| vec![base.vmp_iterations()]);
                let mut cells = Vec::with_capacity(ns.len() * ks.len());
                for &n in &ns {
                    for &k in &ks {
                        let mut c = base.clone();
                        c.set_n(n);
                        c.set_vmp_iterations(k);
                        c.check()?;
                        cells.push(c);
                    }
                }
                cells
            }
            _ => return Err(config_err("", "grid must be an array of configs or an object")),
        };
        if cells.is_empty() {
            return Err(config_err("", "grid has no cells"));
        }
        Ok(Grid { cells })
    }
}

fn prefix(e: Error, p: &str) -> Error {
    match e {
        Error::Config { path, message } if path.is_empty() => config_err(p, message),
        Error::Config { path, message } => config_err(format!("{p}.{path}"), message),
        other => other,
    }
}

fn list(v: Option<&Value>, name: &str) -> Result<Option<Vec<usize>>> {
    let Some(v) = v else { return Ok(None) };
    let xs: Vec<usize> = serde_json::from_value(v.clone()).map_err(|e| config_err(name, e.to_string()))?;
    if xs.is_empty() || xs.contains(&0) {
        return Err(config_err(name, "must be a nonempty list of positive integers"));
    }
    Ok(Some(xs))
}

/// Timing of one cell: the fastest of `reps` inference runs on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub model: String,
    pub n: usize,
    pub iterations: usize,
    pub reps: usize,
    pub min_ms: f64,
    pub ae: BTreeMap<String, f64>,
    pub config: Value,
}

/// Log-log fit of time against `over` (`n` or `iterations`) with the other
/// one held at `fixed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slope {
    pub model: String,
    pub over: String,
    pub fixed: usize,
    pub slope: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares slope of `ln y` on `ln x` and its coefficient of
/// determination. Needs two distinct positive `x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("slope fit needs at least two positive points".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, r2))
}

/// Runs every cell in order, `reps` times each, then fits time against `n`
/// and against iterations wherever a group has two or more distinct values.
pub fn benchmark(grid: &Grid, reps: usize) -> Result<(Vec<BenchRow>, Vec<Slope>)> {
    if reps == 0 {
        return Err(config_err("reps", "must be at least 1"));
    }
    let mut rows = Vec::with_capacity(grid.cells.len());
    for cell in &grid.cells {
        let ds = simulate(cell)?;
        let k = cell.vmp_iterations();
        let mut best: Option<super::RunReport> = None;
        for _ in 0..reps {
            let r = infer(&ds, k, None)?.report;
            if best.as_ref().map_or(true, |b| r.wall_ms < b.wall_ms) {
                best = Some(r);
            }
        }
        let best = best.expect("reps >= 1");
        rows.push(BenchRow {
            model: cell.name().into(),
            n: cell.n(),
            iterations: k,
            reps,
            min_ms: best.wall_ms,
            ae: best.ae,
            config: cell.to_value(),
        });
    }
    let mut slopes = Vec::new();
    for over in ["n", "iterations"] {
        let mut groups: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
        for r in &rows {
            let (x, fixed) = if over == "n" { (r.n, r.iterations) } else { (r.iterations, r.n) };
            groups.entry((r.model.clone(), fixed)).or_default().push((x as f64, r.min_ms));
        }
        for ((model, fixed), pts) in groups {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            if let Ok((slope, r2)) = fit_slope(&xs, &ys) {
                slopes.push(Slope { model, over: over.into(), fixed, slope, r2, points: xs.len() });
            }
        }
    }
    Ok((rows, slopes))
}

/// Writes cells and slopes as one CSV table. `kind` is `cell` or
/// `slope_n` / `slope_iterations`; unused columns are empty.
pub fn write_csv(rows: &[BenchRow], slopes: &[Slope], out: impl Write) -> Result<()> {
    let io = |e: csv::Error| Error::Fault(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "model", "n", "iterations", "reps", "min_ms", "ae", "slope", "r2", "points", "config"]).map_err(io)?;
    for r in rows {
        let ae = serde_json::to_string(&r.ae).expect("maps serialize");
        w.write_record([
            "cell",
            &r.model,
            &r.n.to_string(),
            &r.iterations.to_string(),
            &r.reps.to_string(),
            &r.min_ms.to_string(),
            &ae,
            "",
            "",
            "",
            &r.config.to_string(),
        ])
        .map_err(io)?;
    }
    for s in slopes {
        let (n, k) = if s.over == "n" { (String::new(), s.fixed.to_string()) } else { (s.fixed.to_string(), String::new()) };
        let base = rows.iter().find(|r| r.model == s.model).map(|r| r.config.to_string()).unwrap_or_default();
        w.write_record([
            &format!("slope_{}", s.over),
            &s.model,
            &n,
            &k,
            "",
            "",
            "",
            &s.slope.to_string(),
            &s.r2.to_string(),
            &s.points.to_string(),
            &base,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Fault(format!("writing CSV: {e}")))
}
