//! Message update rules, keyed by node kind, target and inbound signature.

mod discrete;
pub mod energy;
mod gaussian;
mod gcv;
mod mv;

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use crate::dist::{Distribution, Family};
use crate::error::{Error, Result};
use crate::model::{FactorKind, Meta};

pub use gcv::{expected_precision_factor, DEFAULT_GH_POINTS};

/// Local constraint on the target edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    Marginalization,
    MomentMatching,
    /// The target's marginal is restricted to Gaussians.
    GaussianForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyPattern {
    Is(Family),
    Any,
}

impl FamilyPattern {
    pub fn matches(&self, f: Family) -> bool {
        match self {
            FamilyPattern::Is(g) => *g == f,
            FamilyPattern::Any => true,
        }
    }
}

impl fmt::Display for FamilyPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyPattern::Is(g) => write!(f, "{g}"),
            FamilyPattern::Any => f.write_str("Any"),
        }
    }
}

/// Fully specified rule signature. Inputs are named `m_<iface>` for messages
/// and `q_<iface>` or `q_<a>_<b>` for marginals, and kept sorted by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleKey {
    pub node: &'static str,
    pub target: String,
    pub constraint: Constraint,
    pub inputs: Vec<(String, FamilyPattern)>,
}

impl RuleKey {
    pub fn new(node: &'static str, target: &str, constraint: Constraint, inputs: &[(&str, FamilyPattern)]) -> Self {
        let mut inputs: Vec<_> = inputs.iter().map(|(n, p)| (n.to_string(), *p)).collect();
        inputs.sort_by(|a, b| a.0.cmp(&b.0));
        Self { node, target: target.to_string(), constraint, inputs }
    }

    fn specificity(&self) -> usize {
        self.inputs.iter().filter(|(_, p)| matches!(p, FamilyPattern::Is(_))).count()
    }
}

fn describe(node: &str, target: &str, constraint: Constraint, inputs: &[String]) -> String {
    let c = match constraint {
        Constraint::Marginalization => "",
        Constraint::MomentMatching => " with moment matching",
        Constraint::GaussianForm => " with a Gaussian marginal",
    };
    format!("{node}:{target}{c} [{}]", inputs.join(", "))
}

impl fmt::Display for RuleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ins: Vec<_> = self.inputs.iter().map(|(n, p)| format!("{n}: {p}")).collect();
        f.write_str(&describe(self.node, &self.target, self.constraint, &ins))
    }
}

/// Inputs handed to a rule.
pub struct RuleCtx<'a> {
    pub kind: &'a FactorKind,
    pub meta: &'a Meta,
    pub inputs: &'a [(String, Distribution)],
}

impl RuleCtx<'_> {
    pub fn get(&self, name: &str) -> Result<&Distribution> {
        self.inputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::Fault(format!("rule input {name} is missing")))
    }
}

pub type RuleFn = fn(&RuleCtx) -> Result<Distribution>;

type Shape = (&'static str, String, Constraint, Vec<String>);

#[derive(Default)]
pub struct Registry {
    entries: Vec<(RuleKey, RuleFn)>,
    by_shape: HashMap<Shape, Vec<usize>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("rules", &self.entries.len()).finish()
    }
}

fn shape(node: &'static str, target: &str, constraint: Constraint, names: impl Iterator<Item = String>) -> Shape {
    let mut names: Vec<String> = names.collect();
    names.sort();
    (node, target.to_string(), constraint, names)
}

/// Family alternatives per input; an empty slice means any family.
pub type Signature<'a> = &'a [(&'a str, &'a [Family])];

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every rule the benchmark models need.
    pub fn standard() -> Self {
        let mut r = Self::new();
        discrete::register(&mut r).expect("standard rules are unique");
        gaussian::register(&mut r).expect("standard rules are unique");
        mv::register(&mut r).expect("standard rules are unique");
        gcv::register(&mut r).expect("standard rules are unique");
        r
    }

    /// Process-wide standard registry.
    pub fn global() -> &'static Registry {
        static REG: OnceLock<Registry> = OnceLock::new();
        REG.get_or_init(Registry::standard)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &RuleKey> {
        self.entries.iter().map(|(k, _)| k)
    }

    /// Registers one rule. Registering the same key twice is a fault.
    pub fn register(&mut self, key: RuleKey, f: RuleFn) -> Result<()> {
        if self.entries.iter().any(|(k, _)| *k == key) {
            return Err(Error::AmbiguousRule(format!("{key} registered twice")));
        }
        let s = shape(key.node, &key.target, key.constraint, key.inputs.iter().map(|(n, _)| n.clone()));
        self.by_shape.entry(s).or_default().push(self.entries.len());
        self.entries.push((key, f));
        Ok(())
    }

    /// Registers the cartesian product of the family alternatives.
    pub fn register_all(
        &mut self,
        node: &'static str,
        target: &str,
        constraint: Constraint,
        sig: Signature,
        f: RuleFn,
    ) -> Result<()> {
        let mut combos: Vec<Vec<(&str, FamilyPattern)>> = vec![vec![]];
        for (name, fams) in sig {
            let pats: Vec<FamilyPattern> = if fams.is_empty() {
                vec![FamilyPattern::Any]
            } else {
                fams.iter().map(|&g| FamilyPattern::Is(g)).collect()
            };
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    pats.iter().map(move |&p| {
                        let mut c = c.clone();
                        c.push((*name, p));
                        c
                    })
                })
                .collect();
        }
        for c in combos {
            self.register(RuleKey::new(node, target, constraint, &c), f)?;
        }
        Ok(())
    }

    /// The same table without any rule for `node`.
    pub fn without(self, node: &str) -> Self {
        let mut r = Self::new();
        for (k, f) in self.entries {
            if k.node != node {
                r.register(k, f).expect("keys were unique");
            }
        }
        r
    }

    /// Structural check: is any rule registered for these input names?
    pub fn check(&self, node: &'static str, target: &str, constraint: Constraint, names: &[String]) -> Result<()> {
        let s = shape(node, target, constraint, names.iter().cloned());
        if self.by_shape.contains_key(&s) {
            Ok(())
        } else {
            Err(Error::NoRule(describe(node, target, constraint, &s.3)))
        }
    }

    /// The most specific rule matching the inbound families.
    pub fn lookup(
        &self,
        node: &'static str,
        target: &str,
        constraint: Constraint,
        inputs: &[(String, Family)],
    ) -> Result<RuleFn> {
        let mut sorted: Vec<_> = inputs.to_vec();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let sig = || -> Vec<String> { sorted.iter().map(|(n, f)| format!("{n}: {f}")).collect() };
        let s = shape(node, target, constraint, sorted.iter().map(|(n, _)| n.clone()));
        let no_rule = || Error::NoRule(describe(node, target, constraint, &sig()));
        let candidates = self.by_shape.get(&s).ok_or_else(no_rule)?;
        let mut best: Option<(usize, usize)> = None;
        let mut tie = false;
        for &i in candidates {
            let key = &self.entries[i].0;
            if !key.inputs.iter().zip(&sorted).all(|((_, p), (_, f))| p.matches(*f)) {
                continue;
            }
            let sp = key.specificity();
            match best {
                Some((_, b)) if sp < b => {}
                Some((_, b)) if sp == b => tie = true,
                _ => {
                    best = Some((i, sp));
                    tie = false;
                }
            }
        }
        match best {
            None => Err(no_rule()),
            Some(_) if tie => Err(Error::AmbiguousRule(describe(node, target, constraint, &sig()))),
            Some((i, _)) => Ok(self.entries[i].1),
        }
    }
}

/// Looks up and applies a rule from the standard registry.
pub fn apply(
    kind: &FactorKind,
    target: &str,
    constraint: Constraint,
    meta: &Meta,
    inputs: &[(String, Distribution)],
) -> Result<Distribution> {
    let fams: Vec<(String, Family)> = inputs.iter().map(|(n, d)| (n.clone(), d.family())).collect();
    let f = Registry::global().lookup(kind.tag(), target, constraint, &fams)?;
    f(&RuleCtx { kind, meta, inputs })
}

pub(crate) fn positive_precision(w: f64, what: &str) -> Result<f64> {
    if w > 0.0 && w.is_finite() {
        Ok(w)
    } else {
        Err(Error::Precondition(format!("{what} must be positive and finite, got {w}")))
    }
}

/// `(mean, variance)` of a scalar Gaussian or point mass.
pub(crate) fn scalar_moments(d: &Distribution) -> Result<(f64, f64)> {
    match d {
        Distribution::Gaussian(g) => Ok((g.mean(), g.var())),
        Distribution::PointMass(p) => Ok((p.as_scalar()?, 0.0)),
        other => Err(Error::Domain(format!("expected a scalar Gaussian, got {}", other.family()))),
    }
}

pub(crate) const GAUSS: &[Family] = &[Family::Gaussian, Family::PointMass];
