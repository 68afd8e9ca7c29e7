use crate::dist::Distribution;
use crate::error::Result;
use crate::model::{FormConstraint, VarId, VarKind};
use crate::rules::energy::average_energy;

use super::{BfeUpdate, InferenceEngine};

/// Free energy from the latest beliefs, or `None` while some belief is missing.
pub(super) fn evaluate(e: &InferenceEngine, tick: u64) -> Result<Option<BfeUpdate>> {
    let graph = &e.graph;
    let mut energies = Vec::with_capacity(graph.factors().len());
    for node in graph.factors() {
        let f = node.id;
        let plan = &e.plans[f.0];
        let mut beliefs: Vec<(Vec<usize>, Distribution)> = Vec::with_capacity(node.bindings.len());
        for (i, b) in node.bindings.iter().enumerate() {
            let v = b.expect("validated graph");
            if graph.variables()[v.0].kind != VarKind::Random {
                match e.data[v.0].as_ref().and_then(|s| s.latest()) {
                    Some(d) => beliefs.push((vec![i], d)),
                    None => return Ok(None),
                }
            }
        }
        let mut cluster_entropy = 0.0;
        for (c, cluster) in plan.clusters.iter().enumerate() {
            let belief = if cluster.len() == 1 {
                let i = cluster[0];
                let v = node.bindings[i].expect("validated graph");
                let Some(u) = e.marginals[v.0].as_ref().and_then(|s| s.latest()) else { return Ok(None) };
                if node.context.form(node.interface_name(i)) == Some(FormConstraint::PointMass) {
                    Distribution::PointMass(u.dist.mode()?)
                } else {
                    u.dist
                }
            } else {
                match e.joints[f.0][c].as_ref().and_then(|s| s.latest()) {
                    Some(d) => d,
                    None => return Ok(None),
                }
            };
            cluster_entropy += belief.entropy()?;
            beliefs.push((cluster.clone(), belief));
        }
        beliefs.sort_by(|a, b| a.0.cmp(&b.0));
        let u = average_energy(&node.kind, &node.context.meta, &beliefs)?;
        energies.push((f, u - cluster_entropy));
    }
    let mut entropies: Vec<(VarId, f64)> = Vec::new();
    for v in graph.variables() {
        if v.kind != VarKind::Random {
            continue;
        }
        let Some(u) = e.marginals[v.id.0].as_ref().and_then(|s| s.latest()) else { return Ok(None) };
        let d = v.connections.len() as f64;
        let h = if d == 1.0 { 0.0 } else { (d - 1.0) * u.dist.entropy()? };
        entropies.push((v.id, h));
    }
    let mut total = 0.0;
    for (_, x) in &energies {
        total += x;
    }
    for (_, x) in &entropies {
        total += x;
    }
    Ok(Some(BfeUpdate { total, energies, entropies, tick }))
}
