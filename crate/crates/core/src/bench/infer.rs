use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde_json::Value;

use super::{average_error, Dataset, RunReport};
use crate::dist::{Distribution, Point};
use crate::engine::InferenceEngine;
use crate::error::{Error, Result};
use crate::model::config::{build_hgf_slice, build_hmm, build_lgssm, HgfConfig, HmmConfig, LgssmConfig, ModelConfig};
use crate::model::VarId;

/// A run report together with the posteriors it summarizes.
#[derive(Debug, Clone)]
pub struct Inference {
    pub report: RunReport,
    pub posteriors: BTreeMap<String, Vec<Distribution>>,
}

/// Runs the model named by the dataset with `iterations` sweeps (per step
/// for the HGF chain). `trace` receives the engine's emission log.
pub fn infer(ds: &Dataset, iterations: usize, trace: Option<Box<dyn Write>>) -> Result<Inference> {
    ds.check()?;
    match ds.model_config()? {
        ModelConfig::Lgssm(c) => infer_lgssm(ds, &c, iterations, trace),
        ModelConfig::Hmm(c) => infer_hmm(ds, &c, iterations, trace),
        ModelConfig::Hgf(c) => infer_hgf(ds, &c, iterations, trace),
    }
}

fn free_energy(e: &InferenceEngine) -> Result<f64> {
    e.free_energy()?.map(|u| u.total).ok_or_else(|| Error::Fault("free energy is not available yet".into()))
}

fn check_dims(ds: &Dataset, want: usize, what: &str) -> Result<()> {
    match ds.observations.iter().position(|y| y.len() != want) {
        Some(t) => Err(Error::Fault(format!("observation {t} has length {}, the model's {what} is {want}", ds.observations[t].len()))),
        None => Ok(()),
    }
}

fn iterations_ok(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config { path: "iterations".into(), message: "must be at least 1".into() });
    }
    Ok(())
}

fn start(graph: crate::model::ModelGraph, trace: Option<Box<dyn Write>>) -> Result<InferenceEngine> {
    let mut e = InferenceEngine::wire(graph)?;
    if let Some(t) = trace {
        e.set_trace(t);
    }
    e.bfe_stream()?;
    Ok(e)
}

fn marginals(e: &InferenceEngine, vars: &[VarId]) -> Result<Vec<Distribution>> {
    vars.iter().map(|v| e.marginal(*v).ok_or_else(|| Error::Fault(format!("no posterior for variable {}", v.0)))).collect()
}

struct Finish<'a> {
    ds: &'a Dataset,
    config: Value,
    iterations: usize,
    started: Instant,
    peak: usize,
    bfe: Vec<f64>,
    bfe_mean: Option<Vec<f64>>,
}

impl Finish<'_> {
    fn report(self, posteriors: BTreeMap<String, Vec<Distribution>>) -> Result<Inference> {
        let wall_ms = self.started.elapsed().as_secs_f64() * 1e3;
        let mut ae = BTreeMap::new();
        for (name, qs) in &posteriors {
            let truth = self.ds.truth.get(name).ok_or_else(|| Error::Fault(format!("dataset has no truth for `{name}`")))?;
            ae.insert(name.clone(), average_error(qs, truth)?);
        }
        let report = RunReport {
            model: self.ds.model.clone(),
            n: self.ds.len(),
            iterations: self.iterations,
            wall_ms,
            peak_marginals: self.peak,
            ae,
            bfe: self.bfe,
            bfe_mean: self.bfe_mean,
            config: self.config,
            posteriors: posteriors.iter().map(|(k, qs)| (k.clone(), qs.iter().map(|q| q.to_json()).collect())).collect(),
        };
        Ok(Inference { report, posteriors })
    }
}

/// Belief propagation on the full LG-SSM graph.
pub fn infer_lgssm(ds: &Dataset, c: &LgssmConfig, k: usize, trace: Option<Box<dyn Write>>) -> Result<Inference> {
    iterations_ok(k)?;
    let started = Instant::now();
    let p = c.params()?;
    check_dims(ds, p.obs_dim(), "observation dimension")?;
    let model = build_lgssm(ds.len(), &p)?;
    let mut e = start(model.graph, trace)?;
    let bindings: Vec<(VarId, Point)> = model.y.iter().zip(&ds.observations).map(|(v, y)| (*v, Point::vector(y))).collect();
    let mut bfe = Vec::with_capacity(k);
    e.run_sweeps(&bindings, k, |e| free_energy(e).map(|f| bfe.push(f)))?;
    let x = marginals(&e, &model.x)?;
    let finish = Finish { ds, config: ds.config.clone(), iterations: k, started, peak: e.marginal_count(), bfe, bfe_mean: None };
    finish.report(BTreeMap::from([("x".into(), x)]))
}

/// Structured VMP on the HMM with Dirichlet priors. `A` and `B` start at
/// their priors and every state at the uniform distribution.
pub fn infer_hmm(ds: &Dataset, c: &HmmConfig, k: usize, trace: Option<Box<dyn Write>>) -> Result<Inference> {
    iterations_ok(k)?;
    let started = Instant::now();
    let p = c.params()?;
    let m = c.M;
    check_dims(ds, m, "number of states")?;
    let model = build_hmm(ds.len(), &p)?;
    let mut e = start(model.graph, trace)?;
    for v in e.required_marginals() {
        let q = if Some(v) == model.a {
            Distribution::matrix_dirichlet(p.prior_a.clone())?
        } else if Some(v) == model.b {
            Distribution::matrix_dirichlet(p.prior_b.clone())?
        } else {
            Distribution::categorical(&vec![1.0; m])?
        };
        e.set_marginal(v, q)?;
    }
    let bindings: Vec<(VarId, Point)> = model.x.iter().zip(&ds.observations).map(|(v, x)| (*v, Point::vector(x))).collect();
    let mut bfe = Vec::with_capacity(k);
    e.run_sweeps(&bindings, k, |e| free_energy(e).map(|f| bfe.push(f)))?;
    let z = marginals(&e, &model.z)?;
    let finish = Finish { ds, config: ds.config.clone(), iterations: k, started, peak: e.marginal_count(), bfe, bfe_mean: None };
    finish.report(BTreeMap::from([("z".into(), z)]))
}

/// Online filtering with one HGF slice: each step runs `k` sweeps, then the
/// posteriors of both layers become the next step's priors.
pub fn infer_hgf(ds: &Dataset, c: &HgfConfig, k: usize, trace: Option<Box<dyn Write>>) -> Result<Inference> {
    iterations_ok(k)?;
    let started = Instant::now();
    check_dims(ds, 1, "observation dimension")?;
    let model = build_hgf_slice(c)?;
    let mut e = start(model.graph, trace)?;
    let upper = [model.s2, model.s2_prev];
    for v in e.required_marginals() {
        let [m, w] = if upper.contains(&v) { c.s2_prior } else { c.s1_prior };
        e.set_marginal(v, Distribution::normal_mean_precision(m, w)?)?;
    }
    let _redirects = [e.chain_redirect(model.s2, model.s2_prior)?, e.chain_redirect(model.s1, model.s1_prior)?];
    let mut bindings = vec![
        (model.s2_prior.0, Point::Scalar(c.s2_prior[0])),
        (model.s2_prior.1, Point::Scalar(c.s2_prior[1])),
        (model.s1_prior.0, Point::Scalar(c.s1_prior[0])),
        (model.s1_prior.1, Point::Scalar(c.s1_prior[1])),
    ];
    let n = ds.len();
    let (mut s1, mut s2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut bfe = Vec::with_capacity(n * k);
    let mut peak = 0;
    for y in &ds.observations {
        bindings.push((model.y, Point::Scalar(y[0])));
        e.run_sweeps(&bindings, k, |e| free_energy(e).map(|f| bfe.push(f)))?;
        bindings.clear();
        if let Some(err) = e.take_chain_errors().into_iter().next() {
            return Err(err);
        }
        peak = peak.max(e.marginal_count());
        s1.push(e.marginal(model.s1).ok_or_else(|| Error::Fault("no s1 posterior".into()))?);
        s2.push(e.marginal(model.s2).ok_or_else(|| Error::Fault("no s2 posterior".into()))?);
    }
    let bfe_mean = (0..k).map(|i| bfe.iter().skip(i).step_by(k).sum::<f64>() / n as f64).collect();
    let finish = Finish { ds, config: ds.config.clone(), iterations: k, started, peak, bfe, bfe_mean: Some(bfe_mean) };
    finish.report(BTreeMap::from([("s1".into(), s1), ("s2".into(), s2)]))
}
