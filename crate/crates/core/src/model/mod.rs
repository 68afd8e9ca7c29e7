//! Factor graph construction: variables, factor nodes and their contexts.

pub mod config;
mod context;

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;

pub use context::{Factorization, FormConstraint, Meta, NodeContext, Stage};

use crate::dist::{Distribution, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    Random,
    Data,
    Constant(Point),
}

/// Shape of the values a variable takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dims {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Dims {
    pub fn accepts(&self, p: &Point) -> bool {
        match (self, p) {
            (Dims::Scalar, Point::Scalar(_)) => true,
            (Dims::Vector(d), Point::Vector(v)) => v.len() == *d,
            (Dims::Vector(1), Point::Scalar(_)) => true,
            (Dims::Matrix(r, c), Point::Matrix(m)) => m.shape() == (*r, *c),
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub kind: VarKind,
    pub dims: Dims,
    /// `(factor, interface index)` pairs, in connection order.
    pub connections: Vec<(FactorId, usize)>,
    pub pipeline: Vec<Stage>,
}

impl Variable {
    pub fn is_random(&self) -> bool {
        self.kind == VarKind::Random
    }
}

/// Factor types with their fixed interface signatures.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    /// Fixed density on a single variable.
    Prior(Distribution),
    /// `N(out | mean, precision⁻¹)`.
    GaussianMeanPrecision,
    /// `N(out | H·mean, Σ)`; `H` defaults to the identity.
    MvGaussianMeanCovariance { transform: Option<DMatrix<f64>>, covariance: DMatrix<f64> },
    /// `Beta(out | a, b)`.
    Beta,
    /// `Bernoulli(out | p)`.
    Bernoulli,
    /// `Cat(out | A·in)` with `A[i, j] = p(out = i | in = j)`.
    Transition,
    /// Gaussian controlled variance: `N(out | in, exp(κ·z + ω))`.
    Gcv { kappa: f64, omega: f64 },
}

impl FactorKind {
    pub fn tag(&self) -> &'static str {
        match self {
            FactorKind::Prior(_) => "Prior",
            FactorKind::GaussianMeanPrecision => "GaussianMeanPrecision",
            FactorKind::MvGaussianMeanCovariance { .. } => "MvGaussianMeanCovariance",
            FactorKind::Beta => "Beta",
            FactorKind::Bernoulli => "Bernoulli",
            FactorKind::Transition => "Transition",
            FactorKind::Gcv { .. } => "GCV",
        }
    }

    pub fn interfaces(&self) -> &'static [&'static str] {
        match self {
            FactorKind::Prior(_) => &["out"],
            FactorKind::GaussianMeanPrecision => &["out", "mean", "precision"],
            FactorKind::MvGaussianMeanCovariance { .. } => &["out", "mean"],
            FactorKind::Beta => &["out", "a", "b"],
            FactorKind::Bernoulli => &["out", "p"],
            FactorKind::Transition => &["out", "in", "a"],
            FactorKind::Gcv { .. } => &["out", "in", "z"],
        }
    }

    pub fn interface_index(&self, name: &str) -> Option<usize> {
        self.interfaces().iter().position(|&n| n == name)
    }

    fn check(&self) -> Result<()> {
        if let FactorKind::MvGaussianMeanCovariance { transform, covariance } = self {
            let d = covariance.nrows();
            if d == 0 || covariance.ncols() != d {
                return Err(Error::Domain(format!("covariance must be square, got {:?}", covariance.shape())));
            }
            if let Some(h) = transform {
                if h.nrows() != d {
                    return Err(Error::Domain(format!(
                        "transform has {} rows but the covariance is {d}x{d}",
                        h.nrows()
                    )));
                }
            }
        }
        if let FactorKind::Gcv { kappa, omega } = self {
            if !kappa.is_finite() || !omega.is_finite() {
                return Err(Error::Domain("GCV κ and ω must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FactorNode {
    pub id: FactorId,
    pub kind: FactorKind,
    /// Bound variable per interface, in signature order.
    pub bindings: Vec<Option<VarId>>,
    pub context: NodeContext,
}

impl FactorNode {
    pub fn interface_name(&self, i: usize) -> &'static str {
        self.kind.interfaces()[i]
    }

    pub fn variable(&self, iface: &str) -> Option<VarId> {
        self.kind.interface_index(iface).and_then(|i| self.bindings[i])
    }
}

/// How variables with more than two connections are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Termination {
    /// Extra connections are joined by an implicit equality node.
    #[default]
    ImplicitEquality,
    /// Every random variable touches at most two interfaces.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Dangling,
    OverConnected,
    DataConnections,
    UnboundInterface,
    Factorization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub variable: Option<VarId>,
    pub factor: Option<FactorId>,
    pub message: String,
}

/// A terminated factor graph. Building happens through `&mut self` methods;
/// wiring an engine consumes the graph, after which it is immutable.
#[derive(Debug, Clone, Default)]
pub struct ModelGraph {
    vars: Vec<Variable>,
    factors: Vec<FactorNode>,
    default_factorization: Factorization,
    termination: Termination,
}

impl ModelGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Factorization used by nodes whose context does not specify one.
    pub fn with_default_factorization(mut self, f: Factorization) -> Self {
        self.default_factorization = f;
        self
    }

    pub fn with_termination(mut self, t: Termination) -> Self {
        self.termination = t;
        self
    }

    pub fn default_factorization(&self) -> &Factorization {
        &self.default_factorization
    }

    fn add_variable(&mut self, name: &str, kind: VarKind, dims: Dims) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            id,
            name: name.to_string(),
            kind,
            dims,
            connections: Vec::new(),
            pipeline: Vec::new(),
        });
        id
    }

    pub fn add_random_variable(&mut self, name: &str, dims: Dims) -> VarId {
        self.add_variable(name, VarKind::Random, dims)
    }

    pub fn add_data_variable(&mut self, name: &str, dims: Dims) -> VarId {
        self.add_variable(name, VarKind::Data, dims)
    }

    pub fn add_constant(&mut self, name: &str, value: impl Into<Point>) -> Result<VarId> {
        let value = value.into();
        let dims = match &value {
            Point::Scalar(_) => Dims::Scalar,
            Point::Vector(v) => Dims::Vector(v.len()),
            Point::Matrix(m) => Dims::Matrix(m.nrows(), m.ncols()),
        };
        if !value.is_finite() {
            return Err(Error::Domain(format!("constant {name} must be finite")));
        }
        Ok(self.add_variable(name, VarKind::Constant(value), dims))
    }

    /// Adds a node with every interface bound.
    pub fn add_factor(&mut self, kind: FactorKind, bindings: &[(&str, VarId)], context: NodeContext) -> Result<FactorId> {
        for name in kind.interfaces() {
            if !bindings.iter().any(|(n, _)| n == name) {
                return Err(Error::Wiring(format!("{} node is missing interface `{name}`", kind.tag())));
            }
        }
        self.add_factor_partial(kind, bindings, context)
    }

    /// Adds a node that may leave interfaces unbound for later [`bind`](Self::bind) calls.
    pub fn add_factor_partial(
        &mut self,
        kind: FactorKind,
        bindings: &[(&str, VarId)],
        context: NodeContext,
    ) -> Result<FactorId> {
        kind.check()?;
        let mut slots = vec![None; kind.interfaces().len()];
        for &(name, var) in bindings {
            let i = kind
                .interface_index(name)
                .ok_or_else(|| Error::Wiring(format!("{} node has no interface `{name}`", kind.tag())))?;
            if slots[i].is_some() {
                return Err(Error::Wiring(format!("interface `{name}` of {} bound twice", kind.tag())));
            }
            if var.0 >= self.vars.len() {
                return Err(Error::Wiring(format!("unknown variable {var}")));
            }
            slots[i] = Some(var);
        }
        let id = FactorId(self.factors.len());
        let node = FactorNode { id, kind, bindings: vec![None; slots.len()], context };
        node.context.clusters(&node.kind, &self.default_factorization)?;
        self.factors.push(node);
        for (i, v) in slots.into_iter().enumerate() {
            if let Some(v) = v {
                self.attach(id, i, v);
            }
        }
        Ok(id)
    }

    pub fn bind(&mut self, factor: FactorId, iface: &str, var: VarId) -> Result<()> {
        let node = self.factors.get(factor.0).ok_or_else(|| Error::Wiring(format!("unknown factor {factor}")))?;
        let i = node
            .kind
            .interface_index(iface)
            .ok_or_else(|| Error::Wiring(format!("{} node has no interface `{iface}`", node.kind.tag())))?;
        if node.bindings[i].is_some() {
            return Err(Error::Wiring(format!("interface `{iface}` of {factor} bound twice")));
        }
        if var.0 >= self.vars.len() {
            return Err(Error::Wiring(format!("unknown variable {var}")));
        }
        self.attach(factor, i, var);
        Ok(())
    }

    fn attach(&mut self, factor: FactorId, iface: usize, var: VarId) {
        self.factors[factor.0].bindings[iface] = Some(var);
        self.vars[var.0].connections.push((factor, iface));
    }

    /// Appends stages to a node's outbound message pipeline.
    pub fn set_node_pipeline(&mut self, factor: FactorId, stages: Vec<Stage>) -> Result<()> {
        let node = self.factors.get_mut(factor.0).ok_or_else(|| Error::Wiring(format!("unknown factor {factor}")))?;
        node.context.pipeline.extend(stages);
        Ok(())
    }

    /// Appends stages to a variable's marginal pipeline.
    pub fn set_variable_pipeline(&mut self, var: VarId, stages: Vec<Stage>) -> Result<()> {
        let v = self.vars.get_mut(var.0).ok_or_else(|| Error::Wiring(format!("unknown variable {var}")))?;
        v.pipeline.extend(stages);
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn factors(&self) -> &[FactorNode] {
        &self.factors
    }

    pub fn variable(&self, id: VarId) -> Result<&Variable> {
        self.vars.get(id.0).ok_or_else(|| Error::Precondition(format!("unknown variable {id}")))
    }

    pub fn factor(&self, id: FactorId) -> Result<&FactorNode> {
        self.factors.get(id.0).ok_or_else(|| Error::Precondition(format!("unknown factor {id}")))
    }

    pub fn find_variable(&self, name: &str) -> Option<VarId> {
        self.vars.iter().find(|v| v.name == name).map(|v| v.id)
    }

    /// Data variables in declaration order.
    pub fn data_variables(&self) -> Vec<VarId> {
        self.vars.iter().filter(|v| v.kind == VarKind::Data).map(|v| v.id).collect()
    }

    /// Resolved clusters of a node, as interface indices.
    pub fn clusters(&self, factor: FactorId) -> Result<Vec<Vec<usize>>> {
        let node = self.factor(factor)?;
        node.context.clusters(&node.kind, &self.default_factorization)
    }

    /// Structural diagnostics; empty when the graph can be wired.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for v in &self.vars {
            let n = v.connections.len();
            let mut diag = |kind, message: String| {
                out.push(Diagnostic { kind, variable: Some(v.id), factor: None, message })
            };
            match v.kind {
                VarKind::Random if n == 0 => diag(DiagnosticKind::Dangling, format!("variable {} is not connected", v.name)),
                VarKind::Random if n > 2 && self.termination == Termination::Strict => diag(
                    DiagnosticKind::OverConnected,
                    format!("variable {} touches {n} interfaces; a terminated graph allows 2", v.name),
                ),
                VarKind::Data | VarKind::Constant(_) if n != 1 => diag(
                    DiagnosticKind::DataConnections,
                    format!("data/constant variable {} must touch exactly one interface, touches {n}", v.name),
                ),
                _ => {}
            }
        }
        for f in &self.factors {
            for (i, b) in f.bindings.iter().enumerate() {
                if b.is_none() {
                    out.push(Diagnostic {
                        kind: DiagnosticKind::UnboundInterface,
                        variable: None,
                        factor: Some(f.id),
                        message: format!("interface `{}` of {} node {} is unbound", f.interface_name(i), f.kind.tag(), f.id),
                    });
                }
            }
            if let Err(e) = f.context.clusters(&f.kind, &self.default_factorization) {
                out.push(Diagnostic {
                    kind: DiagnosticKind::Factorization,
                    variable: None,
                    factor: Some(f.id),
                    message: e.to_string(),
                });
            }
            let distinct: BTreeSet<_> = f.bindings.iter().flatten().collect();
            if distinct.len() != f.bindings.iter().flatten().count() {
                out.push(Diagnostic {
                    kind: DiagnosticKind::OverConnected,
                    variable: None,
                    factor: Some(f.id),
                    message: format!("{} node {} binds one variable to several interfaces", f.kind.tag(), f.id),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::config::{build_lgssm, LgssmConfig, ModelConfig};
    use super::*;

    fn gmp(g: &mut ModelGraph, ctx: NodeContext) -> Result<FactorId> {
        let x = g.add_random_variable("x", Dims::Scalar);
        let m = g.add_random_variable("m", Dims::Scalar);
        let w = g.add_random_variable("w", Dims::Scalar);
        g.add_factor(FactorKind::GaussianMeanPrecision, &[("out", x), ("mean", m), ("precision", w)], ctx)
    }

    #[test]
    fn fresh_ids() {
        let mut g = ModelGraph::new();
        let ids: BTreeSet<_> = (0..3).map(|i| g.add_random_variable(&format!("v{i}"), Dims::Scalar)).collect();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn dangling_variable_is_flagged() {
        let mut g = ModelGraph::new();
        let v = g.add_random_variable("x", Dims::Scalar);
        let d = g.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::Dangling);
        assert_eq!(d[0].variable, Some(v));
    }

    #[test]
    fn data_variable_on_two_nodes_is_flagged() {
        let mut g = ModelGraph::new();
        let y = g.add_data_variable("y", Dims::Scalar);
        let a = g.add_random_variable("a", Dims::Scalar);
        let b = g.add_random_variable("b", Dims::Scalar);
        let w = g.add_constant("w", 1.0).unwrap();
        let w2 = g.add_constant("w2", 1.0).unwrap();
        g.add_factor(FactorKind::GaussianMeanPrecision, &[("out", y), ("mean", a), ("precision", w)], NodeContext::new()).unwrap();
        g.add_factor(FactorKind::GaussianMeanPrecision, &[("out", y), ("mean", b), ("precision", w2)], NodeContext::new()).unwrap();
        let d = g.validate();
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::DataConnections && d.variable == Some(y)), "{d:?}");
    }

    #[test]
    fn cluster_counts() {
        let mut g = ModelGraph::new();
        let f = gmp(&mut g, NodeContext::mean_field()).unwrap();
        assert_eq!(g.clusters(f).unwrap(), vec![vec![0], vec![1], vec![2]]);
        let f = gmp(&mut g, NodeContext::structured(&[&["out", "mean"], &["precision"]])).unwrap();
        assert_eq!(g.clusters(f).unwrap(), vec![vec![0, 1], vec![2]]);
        let f = gmp(&mut g, NodeContext::new()).unwrap();
        assert_eq!(g.clusters(f).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn default_factorization_applies_to_unspecified_nodes() {
        let mut g = ModelGraph::new().with_default_factorization(Factorization::MeanField);
        let f = gmp(&mut g, NodeContext::new()).unwrap();
        assert_eq!(g.clusters(f).unwrap().len(), 3);
    }

    #[test]
    fn bad_partitions_are_rejected() {
        let mut g = ModelGraph::new();
        for bad in [
            NodeContext::structured(&[&["out"], &["precision"]]),
            NodeContext::structured(&[&["out", "mean"], &["mean", "precision"]]),
            NodeContext::structured(&[&["out", "mean", "precision", "nope"]]),
            NodeContext::structured(&[&["out", "mean", "precision"], &[]]),
        ] {
            assert!(gmp(&mut g, bad).is_err());
        }
        assert!(gmp(&mut g, NodeContext::new().with_form("nope", FormConstraint::PointMass)).is_err());
    }

    #[test]
    fn double_binding_is_a_fault() {
        let mut g = ModelGraph::new();
        let x = g.add_random_variable("x", Dims::Scalar);
        let m = g.add_random_variable("m", Dims::Scalar);
        let e = g
            .add_factor_partial(FactorKind::GaussianMeanPrecision, &[("out", x), ("mean", m), ("mean", m)], NodeContext::new())
            .unwrap_err();
        assert!(e.to_string().contains("mean"), "{e}");
        let f = g.add_factor_partial(FactorKind::GaussianMeanPrecision, &[("out", x)], NodeContext::new()).unwrap();
        g.bind(f, "mean", m).unwrap();
        assert!(g.bind(f, "mean", m).is_err());
    }

    #[test]
    fn missing_interface_is_named() {
        let mut g = ModelGraph::new();
        let x = g.add_random_variable("x", Dims::Scalar);
        let m = g.add_random_variable("m", Dims::Scalar);
        let e = g.add_factor(FactorKind::GaussianMeanPrecision, &[("out", x), ("mean", m)], NodeContext::new()).unwrap_err();
        assert!(e.is_wiring());
        assert!(e.to_string().contains("precision"), "{e}");
        let e = g.add_factor(FactorKind::Bernoulli, &[("out", x), ("q", m)], NodeContext::new()).unwrap_err();
        assert!(e.to_string().contains("`p`") || e.to_string().contains("`q`"), "{e}");
    }

    #[test]
    fn unbound_interface_is_flagged() {
        let mut g = ModelGraph::new();
        let x = g.add_random_variable("x", Dims::Scalar);
        let p = g.add_random_variable("p", Dims::Scalar);
        g.add_factor(FactorKind::Prior(Distribution::beta(1.0, 1.0).unwrap()), &[("out", p)], NodeContext::new()).unwrap();
        g.add_factor_partial(FactorKind::Bernoulli, &[("out", x)], NodeContext::new()).unwrap();
        let d = g.validate();
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::UnboundInterface && d.message.contains("`p`")), "{d:?}");
    }

    #[test]
    fn three_interfaces_on_a_strict_graph() {
        let mut g = ModelGraph::new().with_termination(Termination::Strict);
        let x = g.add_random_variable("x", Dims::Scalar);
        for i in 0..3 {
            let y = g.add_data_variable(&format!("y{i}"), Dims::Scalar);
            let w = g.add_constant(&format!("w{i}"), 1.0).unwrap();
            g.add_factor(FactorKind::GaussianMeanPrecision, &[("out", y), ("mean", x), ("precision", w)], NodeContext::new())
                .unwrap();
        }
        let d = g.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::OverConnected);
        let mut relaxed = g.clone().with_termination(Termination::ImplicitEquality);
        assert!(relaxed.validate().is_empty());
        relaxed.set_variable_pipeline(x, vec![]).unwrap();
    }

    #[test]
    fn lgssm_chain_sizes() {
        for n in [1, 3, 10] {
            let cfg = LgssmConfig::new(n, 2);
            let m = build_lgssm(n, &cfg.params().unwrap()).unwrap();
            assert_eq!(m.graph.factors().len(), 2 * n);
            assert_eq!(m.graph.variables().len(), 2 * n);
            assert!(m.graph.validate().is_empty());
        }
    }

    #[test]
    fn builds_are_deterministic() {
        for json in [
            r#"{"model":"lgssm","n":5,"d":2}"#,
            r#"{"model":"hmm","n":5,"M":3}"#,
            r#"{"model":"hgf","n":5}"#,
        ] {
            let a = ModelConfig::from_json_str(json).unwrap().build().unwrap();
            let b = ModelConfig::from_json_str(json).unwrap().build().unwrap();
            let (ga, gb) = (a.graph(), b.graph());
            assert_eq!(ga.variables().len(), gb.variables().len());
            for (u, v) in ga.variables().iter().zip(gb.variables()) {
                assert_eq!((u.id, &u.name, &u.kind, u.dims, &u.connections), (v.id, &v.name, &v.kind, v.dims, &v.connections));
            }
            for (u, v) in ga.factors().iter().zip(gb.factors()) {
                assert_eq!((u.id, &u.kind, &u.bindings), (v.id, &v.kind, &v.bindings));
                assert_eq!(ga.clusters(u.id).unwrap(), gb.clusters(v.id).unwrap());
            }
            assert!(ga.validate().is_empty(), "{:?}", ga.validate());
        }
    }

    #[test]
    fn every_benchmark_node_partitions_its_interfaces() {
        for json in [r#"{"model":"hmm","n":4}"#, r#"{"model":"hgf","n":1}"#, r#"{"model":"lgssm","n":4}"#] {
            let m = ModelConfig::from_json_str(json).unwrap().build().unwrap();
            let g = m.graph();
            for f in g.factors() {
                let c = g.clusters(f.id).unwrap();
                let mut all: Vec<usize> = c.concat();
                all.sort();
                assert_eq!(all, (0..f.kind.interfaces().len()).collect::<Vec<_>>());
            }
        }
    }
}
