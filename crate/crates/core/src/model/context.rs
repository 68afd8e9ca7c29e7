use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::FactorKind;
use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Partition of a node's interfaces into posterior clusters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Factorization {
    /// One cluster holding every interface.
    #[default]
    Full,
    /// Every interface is its own cluster.
    MeanField,
    /// Explicit clusters by interface name.
    Clusters(Vec<Vec<String>>),
}

impl Factorization {
    pub fn structured(clusters: &[&[&str]]) -> Self {
        Factorization::Clusters(clusters.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect())
    }
}

/// Per-interface constraint on how the outbound message is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormConstraint {
    /// Outbound message by moment matching rather than marginalization.
    MomentMatching,
    /// The node sees the variable's marginal collapsed to its mode.
    PointMass,
    /// The variable's marginal is the free-energy-optimal Gaussian; the node
    /// also reads the inbound message.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Meta {
    /// Gauss-Hermite points for nodes that need quadrature.
    pub gh_points: Option<usize>,
}

pub type StageFn = Arc<dyn Fn(&Distribution) -> Result<Distribution> + Send + Sync>;

/// A transformation applied to every value of a message or marginal stream.
#[derive(Clone)]
pub enum Stage {
    /// Writes every value to the engine trace under the given label.
    Logger(String),
    /// Projects onto a Gaussian with equal first two moments.
    MomentMatching,
    Map(String, StageFn),
}

impl fmt::Debug for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Logger(l) => write!(f, "Logger({l:?})"),
            Stage::MomentMatching => write!(f, "MomentMatching"),
            Stage::Map(l, _) => write!(f, "Map({l:?})"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NodeContext {
    /// `None` defers to the graph default.
    pub factorization: Option<Factorization>,
    pub forms: BTreeMap<String, FormConstraint>,
    pub pipeline: Vec<Stage>,
    pub meta: Meta,
}

impl NodeContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mean_field() -> Self {
        Self::new().factorized(Factorization::MeanField)
    }

    pub fn full() -> Self {
        Self::new().factorized(Factorization::Full)
    }

    pub fn structured(clusters: &[&[&str]]) -> Self {
        Self::new().factorized(Factorization::structured(clusters))
    }

    pub fn factorized(mut self, f: Factorization) -> Self {
        self.factorization = Some(f);
        self
    }

    pub fn with_form(mut self, iface: &str, c: FormConstraint) -> Self {
        self.forms.insert(iface.to_string(), c);
        self
    }

    pub fn with_gh_points(mut self, p: usize) -> Self {
        self.meta.gh_points = Some(p);
        self
    }

    pub fn with_stage(mut self, s: Stage) -> Self {
        self.pipeline.push(s);
        self
    }

    pub fn form(&self, iface: &str) -> Option<FormConstraint> {
        self.forms.get(iface).copied()
    }

    /// Clusters as sorted interface indices, checked to partition the
    /// interface set exactly.
    pub fn clusters(&self, kind: &FactorKind, default: &Factorization) -> Result<Vec<Vec<usize>>> {
        let names = kind.interfaces();
        for iface in self.forms.keys() {
            if kind.interface_index(iface).is_none() {
                return Err(Error::Wiring(format!("form constraint on unknown interface `{iface}` of {}", kind.tag())));
            }
        }
        let f = self.factorization.as_ref().unwrap_or(default);
        let clusters = match f {
            Factorization::Full => vec![(0..names.len()).collect()],
            Factorization::MeanField => (0..names.len()).map(|i| vec![i]).collect(),
            Factorization::Clusters(cs) => {
                let mut seen = vec![false; names.len()];
                let mut out = Vec::new();
                for c in cs {
                    if c.is_empty() {
                        return Err(Error::Wiring(format!("empty cluster in {} factorization", kind.tag())));
                    }
                    let mut idx = Vec::new();
                    for n in c {
                        let i = kind
                            .interface_index(n)
                            .ok_or_else(|| Error::Wiring(format!("cluster names unknown interface `{n}` of {}", kind.tag())))?;
                        if seen[i] {
                            return Err(Error::Wiring(format!("interface `{n}` appears in two clusters")));
                        }
                        seen[i] = true;
                        idx.push(i);
                    }
                    idx.sort_unstable();
                    out.push(idx);
                }
                if let Some(i) = seen.iter().position(|s| !s) {
                    return Err(Error::Wiring(format!("interface `{}` of {} is in no cluster", names[i], kind.tag())));
                }
                out
            }
        };
        Ok(clusters)
    }
}
