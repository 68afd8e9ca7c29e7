use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::dist::{multiply_and_normalize, Distribution};
use crate::error::{Error, Result};
use crate::model::{FactorId, FactorNode, FormConstraint, ModelGraph, VarId, VarKind};
use crate::reactive::{ops, Subject};
use crate::rules::Constraint;

use super::rule::{RuleTask, Sampled};
use super::{InferenceEngine, MarginalUpdate};

/// Where a rule input comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Message from the variable on `iface` into the node.
    Message { var: VarId, iface: usize },
    /// Marginal of the variable on `iface`; sampled, not a trigger.
    Marginal { var: VarId, iface: usize },
    /// Joint marginal over a cluster of the node's interfaces.
    Joint { cluster: Vec<usize> },
    /// Point mass of an observed or constant variable.
    Data { var: VarId, iface: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub name: String,
    pub source: Source,
}

impl InputSpec {
    /// Whether a new value on this input recomputes the rule immediately.
    pub fn triggers(&self) -> bool {
        !matches!(self.source, Source::Marginal { .. })
    }
}

/// Clusters of a node restricted to its random interfaces.
#[derive(Debug, Clone)]
pub(crate) struct NodePlan {
    pub clusters: Vec<Vec<usize>>,
    pub cluster_of: Vec<Option<usize>>,
}

impl NodePlan {
    pub fn new(graph: &ModelGraph, node: &FactorNode) -> Result<Self> {
        let random = |i: usize| {
            let v = node.bindings[i].expect("validated graph");
            graph.variables()[v.0].kind == VarKind::Random
        };
        let clusters: Vec<Vec<usize>> = graph
            .clusters(node.id)?
            .into_iter()
            .map(|c| c.into_iter().filter(|&i| random(i)).collect::<Vec<_>>())
            .filter(|c| !c.is_empty())
            .collect();
        let mut cluster_of = vec![None; node.bindings.len()];
        for (k, c) in clusters.iter().enumerate() {
            for &i in c {
                cluster_of[i] = Some(k);
            }
        }
        Ok(Self { clusters, cluster_of })
    }
}

pub(crate) fn joint_name(node: &FactorNode, cluster: &[usize]) -> String {
    cluster.iter().map(|&i| node.interface_name(i)).collect::<Vec<_>>().join("_")
}

/// Inputs of an outbound computation. `targets` are the interfaces being
/// computed (one for a message, a whole cluster for a joint marginal);
/// `messages` are the interfaces read as inbound messages.
fn plan_inputs(graph: &ModelGraph, node: &FactorNode, plan: &NodePlan, targets: &[usize], messages: &[usize]) -> Vec<InputSpec> {
    let mut out = Vec::new();
    let mut joints_seen = Vec::new();
    for (j, b) in node.bindings.iter().enumerate() {
        let var = b.expect("validated graph");
        let name = node.interface_name(j);
        if messages.contains(&j) {
            out.push(InputSpec { name: format!("m_{name}"), source: Source::Message { var, iface: j } });
            continue;
        }
        if targets.contains(&j) {
            continue;
        }
        if graph.variables()[var.0].kind != VarKind::Random {
            out.push(InputSpec { name: format!("q_{name}"), source: Source::Data { var, iface: j } });
            continue;
        }
        let c = plan.cluster_of[j].expect("random interfaces belong to a cluster");
        let cluster = &plan.clusters[c];
        if cluster.len() == 1 {
            out.push(InputSpec { name: format!("q_{name}"), source: Source::Marginal { var, iface: j } });
        } else if !joints_seen.contains(&c) {
            joints_seen.push(c);
            out.push(InputSpec {
                name: format!("q_{}", joint_name(node, cluster)),
                source: Source::Joint { cluster: cluster.clone() },
            });
        }
    }
    out
}

impl InferenceEngine {
    pub(crate) fn message_plan(&self, f: FactorId, i: usize) -> (Vec<InputSpec>, Constraint) {
        let node = &self.graph.factors()[f.0];
        let plan = &self.plans[f.0];
        let c = plan.cluster_of[i].expect("random interface");
        let mut messages: Vec<usize> = plan.clusters[c].iter().copied().filter(|&j| j != i).collect();
        let constraint = match node.context.form(node.interface_name(i)) {
            Some(FormConstraint::MomentMatching) => {
                messages.push(i);
                Constraint::MomentMatching
            }
            Some(FormConstraint::Gaussian) => {
                messages.push(i);
                Constraint::GaussianForm
            }
            _ => Constraint::Marginalization,
        };
        (plan_inputs(&self.graph, node, plan, &[i], &messages), constraint)
    }

    pub(crate) fn joint_plan(&self, f: FactorId, c: usize) -> Vec<InputSpec> {
        let node = &self.graph.factors()[f.0];
        let plan = &self.plans[f.0];
        let cluster = plan.clusters[c].clone();
        plan_inputs(&self.graph, node, plan, &cluster, &cluster)
    }

    fn check_rule(&self, f: FactorId, target: &str, constraint: Constraint, specs: &[InputSpec]) -> Result<()> {
        let node = &self.graph.factors()[f.0];
        let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        self.registry
            .get()
            .check(node.kind.tag(), target, constraint, &names)
            .map_err(|e| e.context(&format!("node {f} ({})", node.kind.tag())))
    }

    /// Builds the outbound message stream of every random interface.
    pub(crate) fn wire_messages(&mut self) -> Result<()> {
        for f in 0..self.graph.factors().len() {
            let fid = FactorId(f);
            for i in 0..self.graph.factors()[f].bindings.len() {
                if self.messages[f][i].is_none() {
                    continue;
                }
                let (specs, constraint) = self.message_plan(fid, i);
                let target = self.graph.factors()[f].interface_name(i).to_string();
                self.check_rule(fid, &target, constraint, &specs)?;
                let out = self.messages[f][i].clone().expect("checked above");
                self.attach(fid, target, constraint, specs, out, false)?;
            }
        }
        Ok(())
    }

    /// Joint marginal subject of cluster `c` of node `f`, wired on first use.
    pub(crate) fn ensure_joint(&mut self, f: FactorId, c: usize) -> Result<Subject<Distribution>> {
        if let Some(s) = &self.joints[f.0][c] {
            return Ok(s.clone());
        }
        let specs = self.joint_plan(f, c);
        let node = &self.graph.factors()[f.0];
        let target = joint_name(node, &self.plans[f.0].clusters[c]);
        self.check_rule(f, &target, Constraint::Marginalization, &specs)?;
        let subject = Subject::recent(self.scheduler.clone());
        self.joints[f.0][c] = Some(subject.clone());
        self.attach(f, target, Constraint::Marginalization, specs, subject.clone(), true)?;
        Ok(subject)
    }

    /// Message from the variable on `(f, i)` into node `f`: the product of
    /// every other message arriving at the variable.
    pub(crate) fn ensure_inbound(&mut self, f: FactorId, i: usize) -> Result<Subject<Distribution>> {
        if let Some(s) = &self.inbound[f.0][i] {
            return Ok(s.clone());
        }
        let var = self.graph.factors()[f.0].bindings[i].expect("validated graph");
        let v = &self.graph.variables()[var.0];
        let others: Vec<Subject<Distribution>> = v
            .connections
            .iter()
            .filter(|&&(g, k)| (g, k) != (f, i))
            .map(|&(g, k)| self.messages[g.0][k].clone().expect("random interfaces carry messages"))
            .collect();
        let subject = match others.len() {
            0 => {
                return Err(Error::Wiring(format!(
                    "variable {} has no other neighbour to form a message into node {f}",
                    v.name
                )))
            }
            1 => others[0].clone(),
            _ => {
                let s = Subject::recent(self.scheduler.clone());
                let streams = others.iter().map(|o| o.stream()).collect();
                let (target, shared, label) = (s.clone(), self.shared.clone(), format!("{}->{f}", v.name));
                let sub = ops::combine_latest(streams)?.subscribe(move |ds: Vec<Distribution>| {
                    let mut it = ds.into_iter();
                    let first = it.next().expect("nonempty");
                    match it.try_fold(first, |acc, d| multiply_and_normalize(&acc, &d)) {
                        Ok(p) => {
                            let _ = target.push(p);
                        }
                        Err(e) => shared.fault(e.context(&label)),
                    }
                });
                self.subs.push(sub);
                s
            }
        };
        self.inbound[f.0][i] = Some(subject.clone());
        Ok(subject)
    }

    fn attach(
        &mut self,
        f: FactorId,
        target: String,
        constraint: Constraint,
        specs: Vec<InputSpec>,
        out: Subject<Distribution>,
        joint: bool,
    ) -> Result<()> {
        let mut triggers = Vec::new();
        let mut trigger_names = Vec::new();
        let mut sampled = Vec::new();
        for s in &specs {
            match &s.source {
                Source::Message { iface, .. } => {
                    triggers.push(self.ensure_inbound(f, *iface)?.stream());
                    trigger_names.push(s.name.clone());
                }
                Source::Data { var, .. } => {
                    triggers.push(self.data[var.0].clone().expect("data subject").stream());
                    trigger_names.push(s.name.clone());
                }
                Source::Joint { cluster } => {
                    let c = self.plans[f.0].clusters.iter().position(|x| x == cluster).expect("planned cluster");
                    triggers.push(self.ensure_joint(f, c)?.stream());
                    trigger_names.push(s.name.clone());
                }
                Source::Marginal { var, iface } => {
                    let node = &self.graph.factors()[f.0];
                    sampled.push(Sampled {
                        name: s.name.clone(),
                        marginal: self.marginals[var.0].clone().expect("marginal subject"),
                        point_mass: node.context.form(node.interface_name(*iface)) == Some(FormConstraint::PointMass),
                    });
                    self.sampled_vars.insert(*var);
                }
            }
        }
        let node = &self.graph.factors()[f.0];
        let task = Rc::new(RuleTask {
            label: format!("{f}.{target}"),
            kind: self.kinds[f.0].clone(),
            meta: node.context.meta.clone(),
            target: target.clone(),
            constraint,
            trigger_names,
            sampled,
            out,
            pipeline: if joint { Vec::new() } else { node.context.pipeline.clone() },
            joint,
            shared: self.shared.clone(),
            registry: self.registry.clone(),
            latest: RefCell::new(None),
            fired: Cell::new(0),
            pending: Cell::new(false),
            cache: RefCell::new(None),
        });
        for s in &task.sampled {
            let t = Rc::downgrade(&task);
            self.subs.push(s.marginal.stream().subscribe(move |_| {
                if let Some(t) = t.upgrade() {
                    t.on_sampled();
                }
            }));
        }
        if triggers.is_empty() {
            self.starters.push(task.clone());
        } else {
            let t = task.clone();
            self.subs.push(ops::combine_latest(triggers)?.subscribe(move |vals| t.on_triggers(vals)));
        }
        self.tasks.push(task);
        self.inputs.insert((f, target), specs);
        Ok(())
    }

    /// Marginal of every random variable: the normalized product of all
    /// messages arriving at it, formed once the scheduler is idle.
    pub(crate) fn wire_marginals(&mut self) {
        for v in self.graph.variables() {
            if v.kind != VarKind::Random {
                continue;
            }
            let inbound: Vec<Subject<Distribution>> = v
                .connections
                .iter()
                .map(|&(g, k)| self.messages[g.0][k].clone().expect("random interfaces carry messages"))
                .collect();
            let cell = Rc::new(MarginalCell {
                values: RefCell::new(vec![None; inbound.len()]),
                filled: Cell::new(0),
                queued: Cell::new(false),
            });
            let target = self.marginals[v.id.0].clone().expect("marginal subject");
            let (shared, stages, id, label) = (self.shared.clone(), v.pipeline.clone(), v.id, v.name.clone());
            let flush_cell = cell.clone();
            let flush: Rc<dyn Fn()> = Rc::new(move || {
                flush_cell.queued.set(false);
                let values = flush_cell.values.borrow();
                let mut it = values.iter().map(|x| x.as_ref().expect("filled"));
                let first = it.next().expect("connected").clone();
                let product = it
                    .try_fold(first, |acc, d| multiply_and_normalize(&acc, d))
                    .and_then(|d| shared.apply_stages(&stages, d));
                drop(values);
                match product {
                    Ok(dist) => {
                        let tick = shared.next_tick();
                        if shared.tracing() {
                            shared.trace(tick, "marginal", &label, dist.to_json());
                        }
                        shared.bfe_dirty.set(true);
                        let _ = target.push(MarginalUpdate { var: id, dist, tick });
                    }
                    Err(e) => shared.fault(e.context(&format!("marginal of {label}"))),
                }
            });
            for (k, s) in inbound.iter().enumerate() {
                let (cell, flush, scheduler) = (cell.clone(), flush.clone(), self.scheduler.clone());
                let n = inbound.len();
                self.subs.push(s.stream().subscribe(move |d| {
                    let first = cell.values.borrow_mut()[k].replace(d).is_none();
                    if first {
                        cell.filled.set(cell.filled.get() + 1);
                    }
                    if cell.filled.get() == n && !cell.queued.replace(true) {
                        let flush = flush.clone();
                        scheduler.schedule_idle(move || flush());
                    }
                }));
            }
        }
    }
}

struct MarginalCell {
    values: RefCell<Vec<Option<Distribution>>>,
    filled: Cell<usize>,
    queued: Cell<bool>,
}
