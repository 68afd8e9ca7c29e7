//! JSON configuration of the three benchmark models and their graphs.

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Dims, FactorId, FactorKind, Factorization, FormConstraint, ModelGraph, NodeContext, VarId};
use crate::dist::{Distribution, Point};
use crate::error::{Error, Result};

pub use crate::rules::DEFAULT_GH_POINTS;

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(config_err(path, "expected a nonempty rectangular matrix"));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(config_err(path, "matrix entries must be finite"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn check_shape(m: &DMatrix<f64>, shape: (usize, usize), path: &str) -> Result<()> {
    if m.shape() != shape {
        return Err(config_err(path, format!("expected a {}x{} matrix, got {}x{}", shape.0, shape.1, m.nrows(), m.ncols())));
    }
    Ok(())
}

fn check_pd(m: &DMatrix<f64>, path: &str) -> Result<()> {
    if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) || nalgebra::Cholesky::new(m.clone()).is_none() {
        return Err(config_err(path, "matrix must be symmetric positive definite"));
    }
    Ok(())
}

fn check_stochastic_columns(m: &DMatrix<f64>, path: &str) -> Result<()> {
    for (j, c) in m.column_iter().enumerate() {
        if c.iter().any(|&x| x < 0.0) || (c.sum() - 1.0).abs() > 1e-9 {
            return Err(config_err(format!("{path}[*][{j}]"), "columns must be probability vectors"));
        }
    }
    Ok(())
}

fn positive(x: f64, path: &str) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(config_err(path, format!("must be positive, got {x}")));
    }
    Ok(())
}

fn default_seed() -> u64 {
    42
}

fn default_d() -> usize {
    2
}

fn default_one() -> usize {
    1
}

fn default_vmp() -> usize {
    15
}

fn default_m() -> usize {
    3
}

fn default_gh() -> usize {
    DEFAULT_GH_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct LgssmConfig {
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub A: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub B: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub P: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub Q: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub vmp_iterations: usize,
}

/// Resolved LG-SSM parameters: `x_t = A x_{t-1} + N(0, P)`, `y_t = B x_t + N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgssmParams {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub prior_mean: DVector<f64>,
    pub prior_cov: DMatrix<f64>,
}

impl LgssmParams {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.b.nrows()
    }

    /// Rotation by π/15 in the plane for `d = 2`; identity blocks otherwise.
    pub fn default_transition(d: usize) -> DMatrix<f64> {
        let th = std::f64::consts::PI / 15.0;
        let mut a = DMatrix::identity(d, d);
        let mut k = 0;
        while k + 1 < d {
            a[(k, k)] = th.cos();
            a[(k, k + 1)] = -th.sin();
            a[(k + 1, k)] = th.sin();
            a[(k + 1, k + 1)] = th.cos();
            k += 2;
        }
        a
    }
}

impl LgssmConfig {
    pub fn new(n: usize, d: usize) -> Self {
        Self { n, d, A: None, B: None, P: None, Q: None, seed: default_seed(), vmp_iterations: 1 }
    }

    pub fn with_params(n: usize, p: &LgssmParams) -> Self {
        Self {
            n,
            d: p.dim(),
            A: Some(rows(&p.a)),
            B: Some(rows(&p.b)),
            P: Some(rows(&p.p)),
            Q: Some(rows(&p.q)),
            seed: default_seed(),
            vmp_iterations: 1,
        }
    }

    pub fn params(&self) -> Result<LgssmParams> {
        let d = self.d;
        if d == 0 {
            return Err(config_err("d", "must be at least 1"));
        }
        let a = match &self.A {
            Some(m) => matrix(m, "A")?,
            None => LgssmParams::default_transition(d),
        };
        check_shape(&a, (d, d), "A")?;
        let b = match &self.B {
            Some(m) => matrix(m, "B")?,
            None => DMatrix::identity(d, d),
        };
        if b.ncols() != d {
            return Err(config_err("B", format!("must have {d} columns to match d, got {}", b.ncols())));
        }
        let p = match &self.P {
            Some(m) => matrix(m, "P")?,
            None => DMatrix::identity(d, d),
        };
        check_shape(&p, (d, d), "P")?;
        check_pd(&p, "P")?;
        let dy = b.nrows();
        let q = match &self.Q {
            Some(m) => matrix(m, "Q")?,
            None => DMatrix::identity(dy, dy),
        };
        check_shape(&q, (dy, dy), "Q")?;
        check_pd(&q, "Q")?;
        Ok(LgssmParams {
            a,
            b,
            p,
            q,
            prior_mean: DVector::zeros(d),
            prior_cov: DMatrix::identity(d, d) * 100.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct HmmConfig {
    pub n: usize,
    #[serde(default = "default_m")]
    pub M: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priorA: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priorB: Option<Vec<Vec<f64>>>,
    /// Generating transition matrix for simulation (columns sum to one).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub A: Option<Vec<Vec<f64>>>,
    /// Generating emission matrix for simulation (columns sum to one).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub B: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_vmp")]
    pub vmp_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    pub prior_a: DMatrix<f64>,
    pub prior_b: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// `diag` on the diagonal, the rest spread evenly over each column.
pub fn diagonal_stochastic(m: usize, diag: f64) -> DMatrix<f64> {
    if m == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let off = (1.0 - diag) / (m - 1) as f64;
    DMatrix::from_fn(m, m, |i, j| if i == j { diag } else { off })
}

impl HmmConfig {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, M: m, priorA: None, priorB: None, A: None, B: None, seed: default_seed(), vmp_iterations: default_vmp() }
    }

    pub fn params(&self) -> Result<HmmParams> {
        let m = self.M;
        if m < 2 {
            return Err(config_err("M", "needs at least two states"));
        }
        let get = |v: &Option<Vec<Vec<f64>>>, path: &str, default: DMatrix<f64>| -> Result<DMatrix<f64>> {
            let x = match v {
                Some(rows) => matrix(rows, path)?,
                None => default,
            };
            check_shape(&x, (m, m), path)?;
            Ok(x)
        };
        let prior_a = get(&self.priorA, "priorA", DMatrix::from_element(m, m, 1.0))?;
        let prior_b = get(&self.priorB, "priorB", DMatrix::from_fn(m, m, |i, j| if i == j { 10.0 } else { 1.0 }))?;
        for (name, p) in [("priorA", &prior_a), ("priorB", &prior_b)] {
            if p.iter().any(|&x| x <= 0.0) {
                return Err(config_err(name, "concentrations must be positive"));
            }
        }
        let a = get(&self.A, "A", diagonal_stochastic(m, 0.9))?;
        let b = get(&self.B, "B", diagonal_stochastic(m, 0.8))?;
        check_stochastic_columns(&a, "A")?;
        check_stochastic_columns(&b, "B")?;
        Ok(HmmParams { prior_a, prior_b, a, b })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HgfConfig {
    pub n: usize,
    #[serde(default = "HgfConfig::default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub omega: f64,
    /// Precision of the upper-layer random walk.
    #[serde(default = "HgfConfig::default_s2_w")]
    pub s2_w: f64,
    /// Observation precision.
    #[serde(default = "HgfConfig::default_y_w")]
    pub y_w: f64,
    #[serde(default = "default_gh")]
    pub gh_n: usize,
    /// Initial `[mean, precision]` for the lower layer.
    #[serde(default = "HgfConfig::default_prior")]
    pub s1_prior: [f64; 2],
    /// Initial `[mean, precision]` for the upper layer.
    #[serde(default = "HgfConfig::default_prior")]
    pub s2_prior: [f64; 2],
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_vmp")]
    pub vmp_iterations: usize,
}

impl HgfConfig {
    fn default_kappa() -> f64 {
        1.0
    }

    fn default_s2_w() -> f64 {
        5.0
    }

    fn default_y_w() -> f64 {
        10.0
    }

    fn default_prior() -> [f64; 2] {
        [0.0, 0.1]
    }

    pub fn new(n: usize) -> Self {
        serde_json::from_value(serde_json::json!({ "n": n })).expect("defaults are valid")
    }

    pub fn check(&self) -> Result<()> {
        positive(self.s2_w, "s2_w")?;
        positive(self.y_w, "y_w")?;
        positive(self.s1_prior[1], "s1_prior[1]")?;
        positive(self.s2_prior[1], "s2_prior[1]")?;
        if !self.kappa.is_finite() || !self.omega.is_finite() {
            return Err(config_err("kappa", "kappa and omega must be finite"));
        }
        if self.gh_n == 0 {
            return Err(config_err("gh_n", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Lgssm(LgssmConfig),
    Hmm(HmmConfig),
    Hgf(HgfConfig),
}

fn parse<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        config_err(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

impl ModelConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| config_err("", format!("invalid JSON: {e}")))?;
        Self::from_value(v)
    }

    pub fn from_value(mut v: Value) -> Result<Self> {
        let obj = v.as_object_mut().ok_or_else(|| config_err("", "config must be a JSON object"))?;
        let model = obj.remove("model").ok_or_else(|| config_err("model", "missing field"))?;
        let cfg = match model.as_str() {
            Some("lgssm") => ModelConfig::Lgssm(parse(v)?),
            Some("hmm") => ModelConfig::Hmm(parse(v)?),
            Some("hgf") => ModelConfig::Hgf(parse(v)?),
            _ => return Err(config_err("model", format!("unknown model {model}; expected lgssm, hmm or hgf"))),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        let v = match self {
            ModelConfig::Lgssm(c) => serde_json::to_value(c),
            ModelConfig::Hmm(c) => serde_json::to_value(c),
            ModelConfig::Hgf(c) => serde_json::to_value(c),
        };
        let mut v = v.expect("configs serialize to JSON");
        v.as_object_mut().expect("configs serialize to objects").insert("model".into(), Value::from(self.name()));
        v
    }

    pub fn check(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(config_err("n", "must be at least 1"));
        }
        match self {
            ModelConfig::Lgssm(c) => c.params().map(|_| ()),
            ModelConfig::Hmm(c) => c.params().map(|_| ()),
            ModelConfig::Hgf(c) => c.check(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Lgssm(_) => "lgssm",
            ModelConfig::Hmm(_) => "hmm",
            ModelConfig::Hgf(_) => "hgf",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelConfig::Lgssm(c) => c.n,
            ModelConfig::Hmm(c) => c.n,
            ModelConfig::Hgf(c) => c.n,
        }
    }

    pub fn set_n(&mut self, n: usize) {
        match self {
            ModelConfig::Lgssm(c) => c.n = n,
            ModelConfig::Hmm(c) => c.n = n,
            ModelConfig::Hgf(c) => c.n = n,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelConfig::Lgssm(c) => c.seed,
            ModelConfig::Hmm(c) => c.seed,
            ModelConfig::Hgf(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ModelConfig::Lgssm(c) => c.seed = seed,
            ModelConfig::Hmm(c) => c.seed = seed,
            ModelConfig::Hgf(c) => c.seed = seed,
        }
    }

    pub fn vmp_iterations(&self) -> usize {
        match self {
            ModelConfig::Lgssm(c) => c.vmp_iterations,
            ModelConfig::Hmm(c) => c.vmp_iterations,
            ModelConfig::Hgf(c) => c.vmp_iterations,
        }
    }

    pub fn set_vmp_iterations(&mut self, k: usize) {
        match self {
            ModelConfig::Lgssm(c) => c.vmp_iterations = k,
            ModelConfig::Hmm(c) => c.vmp_iterations = k,
            ModelConfig::Hgf(c) => c.vmp_iterations = k,
        }
    }

    /// The model's graph. The HGF graph is a single time slice.
    pub fn build(&self) -> Result<BuiltModel> {
        Ok(match self {
            ModelConfig::Lgssm(c) => BuiltModel::Lgssm(build_lgssm(c.n, &c.params()?)?),
            ModelConfig::Hmm(c) => BuiltModel::Hmm(build_hmm(c.n, &c.params()?)?),
            ModelConfig::Hgf(c) => BuiltModel::Hgf(build_hgf_slice(c)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum BuiltModel {
    Lgssm(LgssmModel),
    Hmm(HmmModel),
    Hgf(HgfModel),
}

impl BuiltModel {
    pub fn graph(&self) -> &ModelGraph {
        match self {
            BuiltModel::Lgssm(m) => &m.graph,
            BuiltModel::Hmm(m) => &m.graph,
            BuiltModel::Hgf(m) => &m.graph,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LgssmModel {
    pub graph: ModelGraph,
    pub x: Vec<VarId>,
    pub y: Vec<VarId>,
}

/// Linear Gaussian state space chain with `2n` factors and `2n` variables.
pub fn build_lgssm(n: usize, p: &LgssmParams) -> Result<LgssmModel> {
    if n == 0 {
        return Err(config_err("n", "must be at least 1"));
    }
    let d = p.dim();
    let dy = p.obs_dim();
    let mut g = ModelGraph::new();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let transition = FactorKind::MvGaussianMeanCovariance { transform: Some(p.a.clone()), covariance: p.p.clone() };
    let likelihood = FactorKind::MvGaussianMeanCovariance { transform: Some(p.b.clone()), covariance: p.q.clone() };
    let prior = Distribution::mv_normal_mean_cov(p.prior_mean.clone(), p.prior_cov.clone())?;
    for t in 0..n {
        let xt = g.add_random_variable(&format!("x[{t}]"), Dims::Vector(d));
        let yt = g.add_data_variable(&format!("y[{t}]"), Dims::Vector(dy));
        if t == 0 {
            g.add_factor(FactorKind::Prior(prior.clone()), &[("out", xt)], NodeContext::new())?;
        } else {
            g.add_factor(transition.clone(), &[("out", xt), ("mean", x[t - 1])], NodeContext::new())?;
        }
        g.add_factor(likelihood.clone(), &[("out", yt), ("mean", xt)], NodeContext::new())?;
        x.push(xt);
        y.push(yt);
    }
    Ok(LgssmModel { graph: g, x, y })
}

#[derive(Debug, Clone)]
pub struct HmmModel {
    pub graph: ModelGraph,
    /// Random transition matrix; `None` when it is known.
    pub a: Option<VarId>,
    /// Random emission matrix; `None` when it is known.
    pub b: Option<VarId>,
    pub z: Vec<VarId>,
    pub x: Vec<VarId>,
    pub transitions: Vec<FactorId>,
}

enum Param {
    Random(VarId),
    Known(&'static str, DMatrix<f64>),
}

impl Param {
    fn var(&self, g: &mut ModelGraph, t: usize) -> Result<VarId> {
        match self {
            Param::Random(v) => Ok(*v),
            Param::Known(name, m) => g.add_constant(&format!("{name}[{t}]"), m.clone()),
        }
    }

    fn random(&self) -> Option<VarId> {
        match self {
            Param::Random(v) => Some(*v),
            Param::Known(..) => None,
        }
    }
}

/// Hidden Markov model with Dirichlet priors on both matrices, structured
/// transition clusters and mean-field observations.
pub fn build_hmm(n: usize, p: &HmmParams) -> Result<HmmModel> {
    let m = p.prior_a.nrows();
    let mut g = ModelGraph::new().with_default_factorization(Factorization::MeanField);
    let a = g.add_random_variable("A", Dims::Matrix(m, m));
    let b = g.add_random_variable("B", Dims::Matrix(m, m));
    g.add_factor(FactorKind::Prior(Distribution::matrix_dirichlet(p.prior_a.clone())?), &[("out", a)], NodeContext::new())?;
    g.add_factor(FactorKind::Prior(Distribution::matrix_dirichlet(p.prior_b.clone())?), &[("out", b)], NodeContext::new())?;
    hmm_chain(g, n, m, Param::Random(a), Param::Random(b))
}

/// Hidden Markov model with both matrices fixed to known values.
pub fn build_hmm_known(n: usize, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<HmmModel> {
    let m = a.nrows();
    if !a.is_square() || b.shape() != (m, m) {
        return Err(config_err("A", "A and B must be square and of equal size"));
    }
    check_stochastic_columns(a, "A")?;
    check_stochastic_columns(b, "B")?;
    let g = ModelGraph::new().with_default_factorization(Factorization::MeanField);
    hmm_chain(g, n, m, Param::Known("A", a.clone()), Param::Known("B", b.clone()))
}

fn hmm_chain(mut g: ModelGraph, n: usize, m: usize, a: Param, b: Param) -> Result<HmmModel> {
    if n == 0 {
        return Err(config_err("n", "must be at least 1"));
    }
    let mut z = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut transitions = Vec::new();
    for t in 0..n {
        let zt = g.add_random_variable(&format!("z[{t}]"), Dims::Vector(m));
        if t == 0 {
            let uniform = Distribution::categorical(&vec![1.0; m])?;
            g.add_factor(FactorKind::Prior(uniform), &[("out", zt)], NodeContext::new())?;
        } else {
            let at = a.var(&mut g, t)?;
            let f = g.add_factor(
                FactorKind::Transition,
                &[("out", zt), ("in", z[t - 1]), ("a", at)],
                NodeContext::structured(&[&["out", "in"], &["a"]]),
            )?;
            transitions.push(f);
        }
        let xt = g.add_data_variable(&format!("x[{t}]"), Dims::Vector(m));
        let bt = b.var(&mut g, t)?;
        g.add_factor(FactorKind::Transition, &[("out", xt), ("in", zt), ("a", bt)], NodeContext::mean_field())?;
        z.push(zt);
        x.push(xt);
    }
    Ok(HmmModel { graph: g, a: a.random(), b: b.random(), z, x, transitions })
}

#[derive(Debug, Clone)]
pub struct HgfModel {
    pub graph: ModelGraph,
    pub s2_prior: (VarId, VarId),
    pub s1_prior: (VarId, VarId),
    pub y: VarId,
    pub s2_prev: VarId,
    pub s1_prev: VarId,
    pub s2: VarId,
    pub s1: VarId,
    pub gcv: FactorId,
}

/// One time slice of the two-layer hierarchical Gaussian filter.
pub fn build_hgf_slice(c: &HgfConfig) -> Result<HgfModel> {
    c.check()?;
    let mut g = ModelGraph::new().with_default_factorization(Factorization::MeanField);
    let s2_mean = g.add_data_variable("s2_prior_mean", Dims::Scalar);
    let s2_prec = g.add_data_variable("s2_prior_precision", Dims::Scalar);
    let s1_mean = g.add_data_variable("s1_prior_mean", Dims::Scalar);
    let s1_prec = g.add_data_variable("s1_prior_precision", Dims::Scalar);
    let y = g.add_data_variable("y", Dims::Scalar);
    let s2_prev = g.add_random_variable("s2_prev", Dims::Scalar);
    let s1_prev = g.add_random_variable("s1_prev", Dims::Scalar);
    let s2 = g.add_random_variable("s2", Dims::Scalar);
    let s1 = g.add_random_variable("s1", Dims::Scalar);
    let s2_w = g.add_constant("s2_w", c.s2_w)?;
    let y_w = g.add_constant("y_w", c.y_w)?;
    let gmp = FactorKind::GaussianMeanPrecision;
    g.add_factor(gmp.clone(), &[("out", s2_prev), ("mean", s2_mean), ("precision", s2_prec)], NodeContext::new())?;
    g.add_factor(gmp.clone(), &[("out", s1_prev), ("mean", s1_mean), ("precision", s1_prec)], NodeContext::new())?;
    g.add_factor(
        gmp.clone(),
        &[("out", s2), ("mean", s2_prev), ("precision", s2_w)],
        NodeContext::structured(&[&["out", "mean"], &["precision"]]),
    )?;
    let gcv = g.add_factor(
        FactorKind::Gcv { kappa: c.kappa, omega: c.omega },
        &[("out", s1), ("in", s1_prev), ("z", s2)],
        NodeContext::structured(&[&["out", "in"], &["z"]])
            .with_form("z", FormConstraint::Gaussian)
            .with_gh_points(c.gh_n),
    )?;
    g.add_factor(gmp, &[("out", y), ("mean", s1), ("precision", y_w)], NodeContext::new())?;
    Ok(HgfModel { graph: g, s2_prior: (s2_mean, s2_prec), s1_prior: (s1_mean, s1_prec), y, s2_prev, s1_prev, s2, s1, gcv })
}

/// Vector point helper for data bindings.
pub fn point_vec(v: &DVector<f64>) -> Point {
    Point::Vector(v.clone())
}
