//! Reactive inference runtime.
//!
//! [`InferenceEngine::wire`] turns a validated [`ModelGraph`] into a network
//! of subjects: one outbound message per random node interface, one marginal
//! per random variable, joint marginals for structured clusters and a Bethe
//! free energy stream. Data enters through [`InferenceEngine::inject`] or
//! [`InferenceEngine::run_iterations`]; every call drains the network to
//! quiescence before returning.
//!
//! Update semantics:
//! - inbound messages, joint marginals and data or constant values trigger a
//!   rule as soon as all of them are available;
//! - singleton marginals are read at computation time and re-trigger a rule
//!   at most once per batch;
//! - marginals are formed once the scheduler is idle, from the latest
//!   messages.

mod bfe;
mod rule;
mod wiring;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::rc::Rc;

use crate::dist::{Distribution, Point};
use crate::error::{Error, Result};
use crate::model::{FactorId, FactorKind, ModelGraph, VarId, VarKind};
use crate::reactive::{Scheduler, StreamHandle, Subject, Subscription, DEFAULT_MAX_EVENTS};
use crate::rules::Registry;

use rule::{Reg, RuleTask, Shared};
use wiring::NodePlan;
pub use wiring::{InputSpec, Source};

/// New marginal of one random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalUpdate {
    pub var: VarId,
    pub dist: Distribution,
    pub tick: u64,
}

/// Bethe free energy after one batch. `total` is the sum of `energies`
/// followed by `entropies`, in the order listed.
#[derive(Debug, Clone, PartialEq)]
pub struct BfeUpdate {
    pub total: f64,
    /// Node average energy minus the node's cluster entropies.
    pub energies: Vec<(FactorId, f64)>,
    /// `(degree - 1) * H[q]` per random variable.
    pub entropies: Vec<(VarId, f64)>,
    pub tick: u64,
}

#[derive(Clone, Default)]
pub struct EngineOptions {
    /// Bound on scheduler deliveries per batch; `None` uses 10⁶.
    pub max_events: Option<usize>,
    /// Rule table; `None` uses the standard registry.
    pub registry: Option<Rc<Registry>>,
}

pub struct InferenceEngine {
    graph: ModelGraph,
    scheduler: Scheduler,
    shared: Rc<Shared>,
    registry: Reg,
    kinds: Vec<Rc<FactorKind>>,
    plans: Vec<NodePlan>,
    data: Vec<Option<Subject<Distribution>>>,
    marginals: Vec<Option<Subject<MarginalUpdate>>>,
    messages: Vec<Vec<Option<Subject<Distribution>>>>,
    inbound: Vec<Vec<Option<Subject<Distribution>>>>,
    joints: Vec<Vec<Option<Subject<Distribution>>>>,
    inputs: HashMap<(FactorId, String), Vec<InputSpec>>,
    tasks: Vec<Rc<RuleTask>>,
    starters: Vec<Rc<RuleTask>>,
    sampled_vars: BTreeSet<VarId>,
    bfe: Subject<BfeUpdate>,
    bfe_active: bool,
    staged: Rc<RefCell<BTreeMap<VarId, Point>>>,
    chain_errors: Rc<RefCell<Vec<Error>>>,
    subs: Vec<Subscription>,
}

impl InferenceEngine {
    pub fn wire(graph: ModelGraph) -> Result<Self> {
        Self::wire_with(graph, EngineOptions::default())
    }

    /// Wires the graph. Fails before any data flows if the graph has
    /// diagnostics or a required rule is missing.
    pub fn wire_with(graph: ModelGraph, options: EngineOptions) -> Result<Self> {
        let diags = graph.validate();
        if !diags.is_empty() {
            let list: Vec<String> = diags.iter().map(|d| d.message.clone()).collect();
            return Err(Error::Wiring(list.join("; ")));
        }
        let scheduler = Scheduler::new(options.max_events.unwrap_or(DEFAULT_MAX_EVENTS));
        let plans = graph
            .factors()
            .iter()
            .map(|f| NodePlan::new(&graph, f))
            .collect::<Result<Vec<_>>>()?;
        let data = graph
            .variables()
            .iter()
            .map(|v| (v.kind != VarKind::Random).then(|| Subject::recent(scheduler.clone())))
            .collect();
        let marginals = graph
            .variables()
            .iter()
            .map(|v| (v.kind == VarKind::Random).then(|| Subject::recent(scheduler.clone())))
            .collect();
        let messages = graph
            .factors()
            .iter()
            .map(|f| {
                f.bindings
                    .iter()
                    .map(|b| {
                        let v = b.expect("validated graph");
                        graph.variables()[v.0].is_random().then(|| Subject::recent(scheduler.clone()))
                    })
                    .collect()
            })
            .collect();
        let inbound = graph.factors().iter().map(|f| vec![None; f.bindings.len()]).collect();
        let joints = plans.iter().map(|p| vec![None; p.clusters.len()]).collect();
        let mut engine = Self {
            kinds: graph.factors().iter().map(|f| Rc::new(f.kind.clone())).collect(),
            graph,
            shared: Rc::new(Shared::default()),
            registry: options.registry.map_or(Reg::Global, Reg::Custom),
            plans,
            data,
            marginals,
            messages,
            inbound,
            joints,
            inputs: HashMap::new(),
            tasks: Vec::new(),
            starters: Vec::new(),
            sampled_vars: BTreeSet::new(),
            bfe: Subject::recent(scheduler.clone()),
            bfe_active: false,
            staged: Rc::new(RefCell::new(BTreeMap::new())),
            chain_errors: Rc::new(RefCell::new(Vec::new())),
            subs: Vec::new(),
            scheduler,
        };
        engine.wire_messages()?;
        engine.wire_marginals();
        Ok(engine)
    }

    pub fn graph(&self) -> &ModelGraph {
        &self.graph
    }

    /// Monotone counter advanced by every emitted message, marginal and
    /// free-energy value.
    pub fn tick(&self) -> u64 {
        self.shared.tick.get()
    }

    /// Writes one JSON object per emission to `sink`.
    pub fn set_trace(&mut self, sink: Box<dyn Write>) {
        *self.shared.trace.borrow_mut() = Some(sink);
    }

    pub fn clear_trace(&mut self) -> Option<Box<dyn Write>> {
        self.shared.trace.borrow_mut().take()
    }

    pub fn set_max_events(&mut self, max: usize) {
        self.scheduler.set_max_events(max);
    }

    /// Inputs of the computation for `target` (an interface name or a joint
    /// cluster such as `out_in`) on `factor`.
    pub fn inputs(&self, factor: FactorId, target: &str) -> Option<&[InputSpec]> {
        self.inputs.get(&(factor, target.to_string())).map(|v| v.as_slice())
    }

    /// Number of wired outbound computations (messages and joint marginals).
    pub fn computation_count(&self) -> usize {
        self.tasks.len()
    }

    /// Variables whose marginals must be initialized before the first batch.
    pub fn required_marginals(&self) -> Vec<VarId> {
        self.sampled_vars.iter().copied().collect()
    }

    fn random_var(&self, var: VarId) -> Result<&crate::model::Variable> {
        let v = self.graph.variable(var)?;
        if v.kind != VarKind::Random {
            return Err(Error::Fault(format!("variable {} is not random", v.name)));
        }
        Ok(v)
    }

    pub fn marginal_stream(&self, var: VarId) -> Result<StreamHandle<MarginalUpdate>> {
        self.random_var(var)?;
        Ok(self.marginals[var.0].as_ref().expect("random").stream())
    }

    /// Latest marginal of a random variable.
    pub fn marginal(&self, var: VarId) -> Option<Distribution> {
        self.marginals.get(var.0)?.as_ref()?.latest().map(|u| u.dist)
    }

    /// Latest outbound message of `factor` on interface `iface`.
    pub fn message(&self, factor: FactorId, iface: &str) -> Option<Distribution> {
        let i = self.graph.factors().get(factor.0)?.kind.interface_index(iface)?;
        self.messages[factor.0][i].as_ref()?.latest()
    }

    /// Latest joint marginal of `factor` over the named cluster, e.g. `out_in`.
    pub fn joint_marginal(&self, factor: FactorId, cluster: &str) -> Option<Distribution> {
        let node = self.graph.factors().get(factor.0)?;
        let c = self.plans[factor.0].clusters.iter().position(|c| wiring::joint_name(node, c) == cluster)?;
        self.joints[factor.0][c].as_ref()?.latest()
    }

    pub fn set_marginal(&mut self, var: VarId, dist: Distribution) -> Result<()> {
        self.random_var(var)?;
        let tick = self.shared.next_tick();
        self.shared.bfe_dirty.set(true);
        self.marginals[var.0].as_ref().expect("random").push(MarginalUpdate { var, dist, tick })
    }

    /// Pushes an initial outbound message of `factor` on `iface`.
    pub fn set_message(&mut self, factor: FactorId, iface: &str, dist: Distribution) -> Result<()> {
        let node = self.graph.factor(factor)?;
        let i = node
            .kind
            .interface_index(iface)
            .ok_or_else(|| Error::Fault(format!("{} has no interface `{iface}`", node.kind.tag())))?;
        let subject = self.messages[factor.0][i]
            .clone()
            .ok_or_else(|| Error::Fault(format!("interface `{iface}` of node {factor} is not random")))?;
        self.shared.next_tick();
        subject.push(dist)?;
        self.take_faults()
    }

    /// Observes `value` on a data variable and propagates to quiescence.
    pub fn inject(&mut self, var: VarId, value: impl Into<Point>) -> Result<()> {
        let value = value.into();
        self.check_data(var, &value)?;
        self.batch(|e| e.push_data(var, value))
    }

    /// Runs `k` sweeps, each injecting every data variable in declaration
    /// order. Values staged by [`chain_redirect`](Self::chain_redirect) are
    /// used unless `bindings` overrides them.
    pub fn run_iterations(&mut self, bindings: &[(VarId, Point)], k: usize) -> Result<()> {
        self.run_sweeps(bindings, k, |_| Ok(()))
    }

    /// [`run_iterations`](Self::run_iterations) with `after` called at the
    /// end of every sweep.
    pub fn run_sweeps(
        &mut self,
        bindings: &[(VarId, Point)],
        k: usize,
        mut after: impl FnMut(&Self) -> Result<()>,
    ) -> Result<()> {
        if k == 0 {
            return Err(Error::Precondition("run_iterations needs k >= 1".into()));
        }
        let mut values = self.staged.borrow().clone();
        for (v, p) in bindings {
            self.check_data(*v, p)?;
            values.insert(*v, p.clone());
        }
        let order: Vec<VarId> =
            self.graph.variables().iter().filter(|v| v.kind == VarKind::Data).map(|v| v.id).collect();
        let missing: Vec<&str> = order
            .iter()
            .filter(|v| !values.contains_key(v))
            .map(|v| self.graph.variables()[v.0].name.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Fault(format!("unbound data variables: {}", missing.join(", "))));
        }
        self.staged.borrow_mut().clear();
        for _ in 0..k {
            self.batch(|e| {
                for v in &order {
                    e.push_data(*v, values[v].clone())?;
                }
                Ok(())
            })?;
            after(self)?;
        }
        Ok(())
    }

    /// Number of random variables that currently hold a marginal.
    pub fn marginal_count(&self) -> usize {
        self.marginals.iter().flatten().filter(|m| m.has_latest()).count()
    }

    /// Redirects every posterior of `from` into the `(mean, precision)` data
    /// pair, to be used by the next [`run_iterations`](Self::run_iterations).
    pub fn chain_redirect(&mut self, from: VarId, to: (VarId, VarId)) -> Result<Subscription> {
        self.random_var(from)?;
        for v in [to.0, to.1] {
            let var = self.graph.variable(v)?;
            if var.kind != VarKind::Data {
                return Err(Error::Fault(format!("redirect target {} is not a data variable", var.name)));
            }
        }
        let (dims_m, dims_w) = (self.graph.variables()[to.0 .0].dims, self.graph.variables()[to.1 .0].dims);
        let (staged, errors) = (self.staged.clone(), self.chain_errors.clone());
        let stream = self.marginals[from.0].as_ref().expect("random").stream();
        Ok(stream.subscribe(move |u: MarginalUpdate| match mean_precision(&u.dist) {
            Ok((m, w)) if dims_m.accepts(&m) && dims_w.accepts(&w) => {
                let mut s = staged.borrow_mut();
                s.insert(to.0, m);
                s.insert(to.1, w);
            }
            Ok(_) => errors.borrow_mut().push(Error::Fault("redirected posterior has the wrong dimension".into())),
            Err(e) => errors.borrow_mut().push(e.context("chain redirect")),
        }))
    }

    /// Errors raised while extracting redirected parameters, oldest first.
    pub fn take_chain_errors(&mut self) -> Vec<Error> {
        std::mem::take(&mut *self.chain_errors.borrow_mut())
    }

    /// Bethe free energy, emitted at the end of every batch in which some
    /// marginal changed and every term is available. Requesting the stream
    /// wires the joint marginals of all structured clusters.
    pub fn bfe_stream(&mut self) -> Result<StreamHandle<BfeUpdate>> {
        if !self.bfe_active {
            for f in 0..self.plans.len() {
                for c in 0..self.plans[f].clusters.len() {
                    if self.plans[f].clusters[c].len() > 1 {
                        self.ensure_joint(FactorId(f), c)?;
                    }
                }
            }
            self.bfe_active = true;
        }
        Ok(self.bfe.stream())
    }

    /// Evaluates the free energy from the current beliefs, if all exist.
    pub fn free_energy(&self) -> Result<Option<BfeUpdate>> {
        bfe::evaluate(self, self.shared.tick.get())
    }

    fn check_data(&self, var: VarId, value: &Point) -> Result<()> {
        let v = self.graph.variable(var)?;
        if v.kind != VarKind::Data {
            return Err(Error::Fault(format!("cannot observe {}: not a data variable", v.name)));
        }
        if !v.dims.accepts(value) {
            return Err(Error::Fault(format!("value for {} does not match {:?}", v.name, v.dims)));
        }
        Ok(())
    }

    fn push_data(&self, var: VarId, value: Point) -> Result<()> {
        let d = Distribution::PointMass(value);
        if self.shared.tracing() {
            let tick = self.shared.next_tick();
            self.shared.trace(tick, "message", &self.graph.variables()[var.0].name, d.to_json());
        }
        self.data[var.0].as_ref().expect("data subject").push(d)
    }

    /// Checks initial marginals, then pushes constants and source nodes.
    fn start(&mut self) -> Result<()> {
        if self.shared.started.get() {
            return Ok(());
        }
        let missing: Vec<&str> = self
            .sampled_vars
            .iter()
            .filter(|v| self.marginals[v.0].as_ref().is_some_and(|m| m.latest().is_none()))
            .map(|v| self.graph.variables()[v.0].name.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Fault(format!("initial marginals required for: {}", missing.join(", "))));
        }
        self.shared.started.set(true);
        for v in self.graph.variables() {
            if let VarKind::Constant(p) = &v.kind {
                self.data[v.id.0].as_ref().expect("constant subject").push(Distribution::PointMass(p.clone()))?;
            }
        }
        for t in &self.starters {
            t.defer();
        }
        Ok(())
    }

    fn release_deferred(&self) {
        let pending = std::mem::take(&mut *self.shared.deferred.borrow_mut());
        for t in pending {
            t.run_deferred();
        }
    }

    /// Runs `f` as one scheduler activation, then emits the free energy and
    /// reports faults.
    fn batch(&mut self, f: impl FnOnce(&mut Self) -> Result<()>) -> Result<()> {
        let scheduler = self.scheduler.clone();
        let shared = self.shared.clone();
        shared.batch.set(shared.batch.get() + 1);
        shared.in_batch.set(true);
        let r = scheduler.hold(|| {
            self.start()?;
            self.release_deferred();
            f(self)
        });
        shared.in_batch.set(false);
        if scheduler.take_overflow() {
            shared.fault(Error::Fault(format!("event budget exhausted in batch {}", shared.batch.get())));
        }
        r?;
        self.emit_bfe();
        self.take_faults()
    }

    fn emit_bfe(&mut self) {
        if !self.bfe_active || !self.shared.bfe_dirty.get() || self.bfe.observer_count() == 0 {
            return;
        }
        match bfe::evaluate(self, 0) {
            Ok(Some(mut u)) => {
                self.shared.bfe_dirty.set(false);
                u.tick = self.shared.next_tick();
                if self.shared.tracing() {
                    self.shared.trace(u.tick, "bfe", "bfe", serde_json::json!(u.total));
                }
                let _ = self.bfe.push(u);
            }
            Ok(None) => {}
            Err(e) => self.shared.fault(e.context("free energy")),
        }
    }

    fn take_faults(&mut self) -> Result<()> {
        let mut faults = std::mem::take(&mut *self.shared.faults.borrow_mut());
        match faults.len() {
            0 => Ok(()),
            1 => Err(faults.remove(0)),
            n => Err(faults.remove(0).context(&format!("first of {n} faults"))),
        }
    }
}

impl Drop for InferenceEngine {
    fn drop(&mut self) {
        for s in &self.subs {
            s.unsubscribe();
        }
        let nested = self.messages.iter().chain(&self.inbound).chain(&self.joints).flatten();
        for s in self.data.iter().chain(nested).flatten() {
            s.detach_all();
        }
        for m in self.marginals.iter().flatten() {
            m.detach_all();
        }
        self.bfe.detach_all();
        self.shared.deferred.borrow_mut().clear();
    }
}

/// `(mean, precision)` of a Gaussian posterior.
pub fn mean_precision(d: &Distribution) -> Result<(Point, Point)> {
    match d {
        Distribution::Gaussian(g) => {
            let (m, w) = (g.mean(), g.precision());
            if !(m.is_finite() && w.is_finite() && w > 0.0) {
                return Err(Error::UndefinedMoment(format!("improper posterior N(mean {m}, precision {w})")));
            }
            Ok((Point::Scalar(m), Point::Scalar(w)))
        }
        Distribution::MvGaussian(g) => {
            if !g.is_proper() {
                return Err(Error::UndefinedMoment("improper multivariate posterior".into()));
            }
            Ok((Point::Vector(g.mean()?), Point::Matrix(g.precision()?)))
        }
        other => Err(Error::Domain(format!("cannot redirect a {} posterior", other.family()))),
    }
}
