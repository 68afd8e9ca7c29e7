//! Synthetic datasets, inference drivers, the average-error metric and the
//! timing harness for the three benchmark models.

mod grid;
mod infer;
mod simulate;

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;

pub use grid::{benchmark, fit_slope, write_csv, BenchRow, Grid, Slope};
pub use infer::{infer, infer_hgf, infer_hmm, infer_lgssm, Inference};
pub use simulate::{rng, simulate, stream};

/// Ground truth and observations of one synthetic run. Every time step is a
/// vector; discrete states and observations are one-hot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub model: String,
    pub seed: u64,
    /// Full model configuration, including `model` and `seed`.
    pub config: Value,
    /// Latent trajectories by name (`x`; `z`; `s1` and `s2`).
    pub truth: BTreeMap<String, Vec<Vec<f64>>>,
    pub observations: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn model_config(&self) -> Result<ModelConfig> {
        let c = ModelConfig::from_value(self.config.clone())?;
        if c.name() != self.model {
            return Err(Error::Config { path: "model".into(), message: format!("dataset is {}, config is {}", self.model, c.name()) });
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Fault("dataset has no observations".into()));
        }
        for (name, xs) in &self.truth {
            if xs.len() != n {
                return Err(Error::Fault(format!("truth `{name}` has {} steps, observations have {n}", xs.len())));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("datasets serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(s).map_err(|e| Error::Config { path: String::new(), message: format!("invalid dataset: {e}") })?;
        d.check()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub n: usize,
    /// Sweeps over the full graph, or iterations per step for the HGF chain.
    pub iterations: usize,
    /// Graph construction, wiring and inference.
    pub wall_ms: f64,
    pub peak_marginals: usize,
    /// Average error per latent sequence.
    pub ae: BTreeMap<String, f64>,
    /// One value per sweep, step-major for the HGF chain.
    pub bfe: Vec<f64>,
    /// HGF only: `bfe` averaged over steps for each iteration index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bfe_mean: Option<Vec<f64>>,
    pub config: Value,
    /// Final posterior of every latent variable, by sequence.
    #[serde(default)]
    pub posteriors: BTreeMap<String, Vec<Value>>,
}

/// `E_q[‖x - r‖²]` in closed form for Gaussians and point masses; for
/// categorical posteriors (with one-hot `r`) the 0/1 mismatch of the argmax.
pub fn expected_error(q: &Distribution, r: &[f64]) -> Result<f64> {
    let dim_err = || Error::Fault(format!("truth of length {} does not match the posterior", r.len()));
    match q {
        Distribution::Gaussian(g) => {
            let [x] = r else { return Err(dim_err()) };
            Ok((g.mean() - x).powi(2) + g.var())
        }
        Distribution::MvGaussian(_) => {
            let (m, c) = (q.mean_vector()?, q.cov_matrix()?);
            if m.len() != r.len() {
                return Err(dim_err());
            }
            Ok((m - DVector::from_column_slice(r)).norm_squared() + c.trace())
        }
        Distribution::Categorical(c) => {
            if c.len() != r.len() {
                return Err(dim_err());
            }
            let truth = r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).ok_or_else(dim_err)?;
            Ok(if c.argmax() == truth { 0.0 } else { 1.0 })
        }
        Distribution::PointMass(p) => {
            let v = p.as_vector()?;
            if v.len() != r.len() {
                return Err(dim_err());
            }
            Ok(v.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum())
        }
        other => Err(Error::Domain(format!("no average error for {} posteriors", other.family()))),
    }
}

/// Time-averaged expected error of one posterior sequence.
pub fn average_error(posteriors: &[Distribution], truth: &[Vec<f64>]) -> Result<f64> {
    if posteriors.len() != truth.len() || truth.is_empty() {
        return Err(Error::Fault(format!("{} posteriors for {} truth values", posteriors.len(), truth.len())));
    }
    let mut s = 0.0;
    for (q, r) in posteriors.iter().zip(truth) {
        s += expected_error(q, r)?;
    }
    Ok(s / truth.len() as f64)
}

/// Average error pooled over datasets and time steps.
pub fn average_error_datasets(runs: &[(Vec<Distribution>, Vec<Vec<f64>>)]) -> Result<f64> {
    let per: Vec<Result<(f64, usize)>> =
        crate::par::map(runs, |(q, r)| average_error(q, r).map(|ae| (ae * r.len() as f64, r.len())));
    let (mut s, mut n) = (0.0, 0usize);
    for p in per {
        let (a, b) = p?;
        s += a;
        n += b;
    }
    Ok(s / n as f64)
}

/// Monte Carlo estimate of [`average_error`] for Gaussian posteriors:
/// `(mean, standard error)` from `samples` draws per time step. Step `t`
/// draws from generator stream `t` of `seed`.
pub fn average_error_mc(posteriors: &[Distribution], truth: &[Vec<f64>], samples: usize, seed: u64) -> Result<(f64, f64)> {
    if posteriors.len() != truth.len() || truth.is_empty() || samples < 2 {
        return Err(Error::Fault("Monte Carlo average error needs matching nonempty inputs and >= 2 samples".into()));
    }
    let steps: Vec<usize> = (0..truth.len()).collect();
    let per = crate::par::map(&steps, |&t| -> Result<(f64, f64)> {
        let (m, c) = match &posteriors[t] {
            Distribution::Gaussian(g) => (DVector::from_element(1, g.mean()), nalgebra::DMatrix::from_element(1, 1, g.var())),
            q @ Distribution::MvGaussian(_) => (q.mean_vector()?, q.cov_matrix()?),
            other => return Err(Error::Domain(format!("Monte Carlo error needs Gaussians, got {}", other.family()))),
        };
        let l = c.cholesky().ok_or_else(|| Error::Numerical("posterior covariance is not positive definite".into()))?.l();
        let r = DVector::from_column_slice(&truth[t]);
        let mut g = rng(seed, t as u64);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let z = DVector::from_fn(m.len(), |_, _| g.sample::<f64, _>(StandardNormal));
            let f = (&m + &l * z - &r).norm_squared();
            s += f;
            s2 += f * f;
        }
        let k = samples as f64;
        let mean = s / k;
        Ok((mean, (s2 / k - mean * mean) * k / (k - 1.0)))
    });
    let (mut mean, mut var) = (0.0, 0.0);
    let n = truth.len() as f64;
    for p in per {
        let (m, v) = p?;
        mean += m / n;
        var += v / (samples as f64 * n * n);
    }
    Ok((mean, var.sqrt()))
}
