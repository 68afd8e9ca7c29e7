use std::cell::{Cell, RefCell};
use std::io::Write;
use std::rc::Rc;

use serde_json::{json, Value};

use crate::dist::{Distribution, Family};
use crate::error::{Error, Result};
use crate::model::{FactorKind, Meta, Stage};
use crate::reactive::Subject;
use crate::rules::{Constraint, Registry, RuleCtx, RuleFn};

use super::MarginalUpdate;

#[derive(Clone)]
pub(crate) enum Reg {
    Global,
    Custom(Rc<Registry>),
}

impl Reg {
    pub fn get(&self) -> &Registry {
        match self {
            Reg::Global => Registry::global(),
            Reg::Custom(r) => r,
        }
    }
}

/// State shared by every closure of one engine.
#[derive(Default)]
pub(crate) struct Shared {
    pub tick: Cell<u64>,
    pub batch: Cell<u64>,
    pub in_batch: Cell<bool>,
    pub started: Cell<bool>,
    pub bfe_dirty: Cell<bool>,
    pub faults: RefCell<Vec<Error>>,
    pub deferred: RefCell<Vec<Rc<RuleTask>>>,
    pub trace: RefCell<Option<Box<dyn Write>>>,
}

impl Shared {
    pub fn next_tick(&self) -> u64 {
        let t = self.tick.get() + 1;
        self.tick.set(t);
        t
    }

    pub fn fault(&self, e: Error) {
        self.faults.borrow_mut().push(e);
    }

    pub fn tracing(&self) -> bool {
        self.trace.borrow().is_some()
    }

    pub fn trace(&self, tick: u64, kind: &str, source: &str, payload: Value) {
        let mut sink = self.trace.borrow_mut();
        if let Some(w) = sink.as_mut() {
            let line = json!({ "tick": tick, "kind": kind, "source": source, "payload": payload });
            if let Err(e) = writeln!(w, "{line}") {
                *sink = None;
                drop(sink);
                self.fault(Error::Fault(format!("trace sink failed: {e}")));
            }
        }
    }

    pub fn apply_stages(&self, stages: &[Stage], mut d: Distribution) -> Result<Distribution> {
        for s in stages {
            d = match s {
                Stage::Logger(label) => {
                    if self.tracing() {
                        self.trace(self.tick.get(), "log", label, d.to_json());
                    }
                    d
                }
                Stage::MomentMatching => d.moment_match_gaussian()?,
                Stage::Map(_, f) => f(&d)?,
            };
        }
        Ok(d)
    }
}

pub(crate) struct Sampled {
    pub name: String,
    pub marginal: Subject<MarginalUpdate>,
    pub point_mass: bool,
}

/// One outbound computation of a node: a message towards an interface or a
/// joint marginal over a cluster.
pub(crate) struct RuleTask {
    pub label: String,
    pub kind: Rc<FactorKind>,
    pub meta: Meta,
    pub target: String,
    pub constraint: Constraint,
    pub trigger_names: Vec<String>,
    pub sampled: Vec<Sampled>,
    pub out: Subject<Distribution>,
    pub pipeline: Vec<Stage>,
    pub joint: bool,
    pub shared: Rc<Shared>,
    pub registry: Reg,
    pub latest: RefCell<Option<Vec<Distribution>>>,
    pub fired: Cell<u64>,
    pub pending: Cell<bool>,
    pub cache: RefCell<Option<(Vec<Family>, RuleFn)>>,
}

impl RuleTask {
    pub fn on_triggers(&self, values: Vec<Distribution>) {
        *self.latest.borrow_mut() = Some(values);
        self.compute();
    }

    /// A sampled marginal changed. Recomputes at most once per batch; later
    /// changes wait for the next batch. The catch-up run at the start of a
    /// batch does not count.
    pub fn on_sampled(self: &Rc<Self>) {
        let sh = &self.shared;
        if sh.started.get() && sh.in_batch.get() && self.fired.get() != sh.batch.get() {
            self.fired.set(sh.batch.get());
            self.compute();
        } else {
            self.defer();
        }
    }

    pub fn defer(self: &Rc<Self>) {
        if !self.pending.replace(true) {
            self.shared.deferred.borrow_mut().push(self.clone());
        }
    }

    pub fn run_deferred(&self) {
        self.pending.set(false);
        self.compute();
    }

    fn compute(&self) {
        let mut inputs = Vec::with_capacity(self.trigger_names.len() + self.sampled.len());
        if !self.trigger_names.is_empty() {
            let latest = self.latest.borrow();
            let Some(values) = latest.as_ref() else { return };
            inputs.extend(self.trigger_names.iter().cloned().zip(values.iter().cloned()));
        }
        for s in &self.sampled {
            let Some(u) = s.marginal.latest() else {
                self.shared.fault(Error::Fault(format!("{}: marginal {} has no value", self.label, s.name)));
                return;
            };
            let d = if s.point_mass {
                match u.dist.mode() {
                    Ok(p) => Distribution::PointMass(p),
                    Err(e) => return self.shared.fault(e.context(&self.label)),
                }
            } else {
                u.dist
            };
            inputs.push((s.name.clone(), d));
        }
        match self.evaluate(&inputs) {
            Ok(d) => {
                if self.out.latest_is(&d) {
                    return;
                }
                if self.joint {
                    self.shared.bfe_dirty.set(true);
                }
                if self.shared.tracing() {
                    let tick = self.shared.next_tick();
                    let kind = if self.joint { "marginal" } else { "message" };
                    self.shared.trace(tick, kind, &self.label, d.to_json());
                } else {
                    self.shared.next_tick();
                }
                let _ = self.out.push(d);
            }
            Err(e) => self.shared.fault(e.context(&self.label)),
        }
    }

    fn evaluate(&self, inputs: &[(String, Distribution)]) -> Result<Distribution> {
        let fams: Vec<Family> = inputs.iter().map(|(_, d)| d.family()).collect();
        let cached = match &*self.cache.borrow() {
            Some((f, rule)) if *f == fams => Some(*rule),
            _ => None,
        };
        let rule = match cached {
            Some(r) => r,
            None => {
                let named: Vec<(String, Family)> = inputs.iter().map(|(n, d)| (n.clone(), d.family())).collect();
                let r = self.registry.get().lookup(self.kind.tag(), &self.target, self.constraint, &named)?;
                *self.cache.borrow_mut() = Some((fams, r));
                r
            }
        };
        let d = rule(&RuleCtx { kind: &self.kind, meta: &self.meta, inputs })?;
        self.shared.apply_stages(&self.pipeline, d)
    }
}
