use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::model::config::{HgfConfig, HmmConfig, LgssmConfig, ModelConfig};

/// Streams of the ChaCha8 generator seeded with the dataset seed. Each
/// random quantity draws from its own stream, so changing one part of a
/// model leaves the others' draws unchanged.
pub mod stream {
    pub const STATE: u64 = 1;
    pub const OBSERVATION: u64 = 2;
    pub const UPPER_STATE: u64 = 3;
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn gaussian(r: &mut ChaCha8Rng, chol: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(chol.nrows(), |_, _| normal(r));
    chol * z
}

fn cholesky(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Fault(format!("{name} is not positive definite")))
}

fn categorical(r: &mut ChaCha8Rng, p: nalgebra::DVectorView<f64>) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (i, x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn one_hot(m: usize, i: usize) -> Vec<f64> {
    (0..m).map(|j| if j == i { 1.0 } else { 0.0 }).collect()
}

/// Ancestral sample of the configured model with the config's seed.
pub fn simulate(config: &ModelConfig) -> Result<Dataset> {
    config.check()?;
    let (truth, observations) = match config {
        ModelConfig::Lgssm(c) => lgssm(c)?,
        ModelConfig::Hmm(c) => hmm(c)?,
        ModelConfig::Hgf(c) => hgf(c),
    };
    Ok(Dataset { model: config.name().into(), seed: config.seed(), config: config.to_value(), truth, observations })
}

type Sample = (BTreeMap<String, Vec<Vec<f64>>>, Vec<Vec<f64>>);

/// `x₁ ~ N(0, P)`, `xₜ = A xₜ₋₁ + N(0, P)`, `yₜ = B xₜ + N(0, Q)`.
fn lgssm(c: &LgssmConfig) -> Result<Sample> {
    let p = c.params()?;
    let (lp, lq) = (cholesky(&p.p, "P")?, cholesky(&p.q, "Q")?);
    let (mut rs, mut ro) = (rng(c.seed, stream::STATE), rng(c.seed, stream::OBSERVATION));
    let mut x = gaussian(&mut rs, &lp);
    let (mut xs, mut ys) = (Vec::with_capacity(c.n), Vec::with_capacity(c.n));
    for t in 0..c.n {
        if t > 0 {
            x = &p.a * &x + gaussian(&mut rs, &lp);
        }
        let y = &p.b * &x + gaussian(&mut ro, &lq);
        xs.push(x.as_slice().to_vec());
        ys.push(y.as_slice().to_vec());
    }
    Ok((BTreeMap::from([("x".to_string(), xs)]), ys))
}

/// Uniform `z₁`, `zₜ ~ Cat(A[:, zₜ₋₁])`, `xₜ ~ Cat(B[:, zₜ])`; both as one-hot vectors.
fn hmm(c: &HmmConfig) -> Result<Sample> {
    let p = c.params()?;
    let m = c.M;
    let (mut rs, mut ro) = (rng(c.seed, stream::STATE), rng(c.seed, stream::OBSERVATION));
    let mut z = rs.random_range(0..m);
    let (mut zs, mut xs) = (Vec::with_capacity(c.n), Vec::with_capacity(c.n));
    for t in 0..c.n {
        if t > 0 {
            z = categorical(&mut rs, p.a.column(z));
        }
        zs.push(one_hot(m, z));
        xs.push(one_hot(m, categorical(&mut ro, p.b.column(z))));
    }
    Ok((BTreeMap::from([("z".to_string(), zs)]), xs))
}

/// Upper layer: random walk with precision `s2_w`. Lower layer: random walk
/// with variance `exp(κ s2 + ω)`. Observations: precision `y_w`. Both walks
/// start at their prior means.
fn hgf(c: &HgfConfig) -> Sample {
    let (mut r2, mut r1, mut ro) =
        (rng(c.seed, stream::UPPER_STATE), rng(c.seed, stream::STATE), rng(c.seed, stream::OBSERVATION));
    let (mut s2, mut s1) = (c.s2_prior[0], c.s1_prior[0]);
    let (mut a, mut b, mut y) = (Vec::with_capacity(c.n), Vec::with_capacity(c.n), Vec::with_capacity(c.n));
    for _ in 0..c.n {
        s2 += normal(&mut r2) / c.s2_w.sqrt();
        s1 += normal(&mut r1) * (0.5 * (c.kappa * s2 + c.omega)).exp();
        a.push(vec![s2]);
        b.push(vec![s1]);
        y.push(vec![s1 + normal(&mut ro) / c.y_w.sqrt()]);
    }
    (BTreeMap::from([("s1".to_string(), b), ("s2".to_string(), a)]), y)
}
