//! Prior, Beta, Bernoulli and Transition nodes.

use nalgebra::{DMatrix, DVector};

use super::{Constraint, Registry, RuleCtx};
use crate::dist::{log_sum_exp, Categorical, Distribution, Family};
use crate::error::{Error, Result};
use crate::model::FactorKind;

const CAT: &[Family] = &[Family::Categorical, Family::PointMass];
const MATRIX: &[Family] = &[Family::MatrixDirichlet, Family::PointMass];

fn prior_out(c: &RuleCtx) -> Result<Distribution> {
    match c.kind {
        FactorKind::Prior(d) => Ok(d.clone()),
        k => Err(Error::Fault(format!("{} is not a Prior node", k.tag()))),
    }
}

fn beta_out(c: &RuleCtx) -> Result<Distribution> {
    Distribution::beta(c.get("q_a")?.mean_scalar()?, c.get("q_b")?.mean_scalar()?)
}

fn bernoulli_p(c: &RuleCtx) -> Result<Distribution> {
    let y = c.get("q_out")?.mean_scalar()?;
    Distribution::beta(1.0 + y, 2.0 - y)
}

fn bernoulli_out_sp(c: &RuleCtx) -> Result<Distribution> {
    Distribution::bernoulli(c.get("m_p")?.mean_scalar()?)
}

fn bernoulli_out_mf(c: &RuleCtx) -> Result<Distribution> {
    let q = c.get("q_p")?;
    let (l1, l0) = match q {
        Distribution::PointMass(p) => {
            let p = p.as_scalar()?;
            (p.ln(), (1.0 - p).ln())
        }
        _ => {
            let e = q.expectation_log()?.as_vector()?;
            (e[0], e[1])
        }
    };
    let z = log_sum_exp(&[l1, l0]);
    Distribution::bernoulli((l1 - z).exp())
}

/// Probability vector of a Categorical or a one-hot point.
pub(crate) fn probs(d: &Distribution) -> Result<DVector<f64>> {
    match d {
        Distribution::Categorical(c) => Ok(c.probs()),
        Distribution::PointMass(p) => p.as_vector(),
        other => Err(Error::Domain(format!("expected Categorical, got {}", other.family()))),
    }
}

fn log_probs(d: &Distribution) -> Result<DVector<f64>> {
    match d {
        Distribution::Categorical(c) => Ok(c.log_probs().clone()),
        _ => Ok(probs(d)?.map(f64::ln)),
    }
}

/// `E[log A]`, column `j` being the distribution of `out` given `in = j`.
pub(crate) fn expected_log_matrix(q: &Distribution) -> Result<DMatrix<f64>> {
    match q.expectation_log()? {
        crate::dist::Point::Matrix(m) => Ok(m),
        p => Err(Error::Domain(format!("expected a matrix-valued E[log A], got a {}", p.kind()))),
    }
}

/// `w·l` with `0·(-inf) = 0`.
pub(crate) fn weighted_log(w: f64, l: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * l
    }
}

fn categorical(logw: DVector<f64>) -> Result<Distribution> {
    Ok(Distribution::Categorical(Categorical::from_log(logw)?))
}

fn check_dims(la: &DMatrix<f64>, rows: Option<usize>, cols: Option<usize>) -> Result<()> {
    if rows.is_some_and(|r| r != la.nrows()) || cols.is_some_and(|c| c != la.ncols()) {
        return Err(Error::Domain(format!(
            "transition matrix is {}x{}, states have sizes {rows:?} x {cols:?}",
            la.nrows(),
            la.ncols()
        )));
    }
    Ok(())
}

fn out_sp(c: &RuleCtx) -> Result<Distribution> {
    let la = expected_log_matrix(c.get("q_a")?)?;
    let lin = log_probs(c.get("m_in")?)?;
    check_dims(&la, None, Some(lin.len()))?;
    let out = DVector::from_fn(la.nrows(), |i, _| {
        let terms: Vec<f64> = (0..la.ncols()).map(|j| la[(i, j)] + lin[j]).collect();
        log_sum_exp(&terms)
    });
    categorical(out)
}

fn in_sp(c: &RuleCtx) -> Result<Distribution> {
    let la = expected_log_matrix(c.get("q_a")?)?;
    let lout = log_probs(c.get("m_out")?)?;
    check_dims(&la, Some(lout.len()), None)?;
    let out = DVector::from_fn(la.ncols(), |j, _| {
        let terms: Vec<f64> = (0..la.nrows()).map(|i| la[(i, j)] + lout[i]).collect();
        log_sum_exp(&terms)
    });
    categorical(out)
}

fn out_mf(c: &RuleCtx) -> Result<Distribution> {
    let la = expected_log_matrix(c.get("q_a")?)?;
    let q = probs(c.get("q_in")?)?;
    check_dims(&la, None, Some(q.len()))?;
    categorical(DVector::from_fn(la.nrows(), |i, _| (0..la.ncols()).map(|j| weighted_log(q[j], la[(i, j)])).sum()))
}

fn in_mf(c: &RuleCtx) -> Result<Distribution> {
    let la = expected_log_matrix(c.get("q_a")?)?;
    let q = probs(c.get("q_out")?)?;
    check_dims(&la, Some(q.len()), None)?;
    categorical(DVector::from_fn(la.ncols(), |j, _| (0..la.nrows()).map(|i| weighted_log(q[i], la[(i, j)])).sum()))
}

fn a_sf(c: &RuleCtx) -> Result<Distribution> {
    match c.get("q_out_in")? {
        Distribution::Contingency(j) => Distribution::matrix_dirichlet(j.add_scalar(1.0)),
        other => Err(Error::Domain(format!("expected Contingency, got {}", other.family()))),
    }
}

fn a_mf(c: &RuleCtx) -> Result<Distribution> {
    let qo = probs(c.get("q_out")?)?;
    let qi = probs(c.get("q_in")?)?;
    Distribution::matrix_dirichlet((qo * qi.transpose()).add_scalar(1.0))
}

fn joint_out_in(c: &RuleCtx) -> Result<Distribution> {
    let la = expected_log_matrix(c.get("q_a")?)?;
    let lo = log_probs(c.get("m_out")?)?;
    let li = log_probs(c.get("m_in")?)?;
    check_dims(&la, Some(lo.len()), Some(li.len()))?;
    let logj = DMatrix::from_fn(la.nrows(), la.ncols(), |i, j| lo[i] + la[(i, j)] + li[j]);
    let z = log_sum_exp(logj.as_slice());
    if z == f64::NEG_INFINITY || z.is_nan() {
        return Err(Error::ZeroMeasure("transition joint has zero mass".into()));
    }
    Distribution::contingency(logj.map(|x| (x - z).exp()))
}

pub(super) fn register(r: &mut Registry) -> Result<()> {
    let mm = Constraint::Marginalization;
    r.register_all("Prior", "out", mm, &[], prior_out)?;
    let pm = &[Family::PointMass][..];
    r.register_all("Beta", "out", mm, &[("q_a", pm), ("q_b", pm)], beta_out)?;
    r.register_all("Bernoulli", "p", mm, &[("q_out", &[Family::PointMass, Family::Bernoulli])], bernoulli_p)?;
    r.register_all("Bernoulli", "out", mm, &[("m_p", &[Family::Beta])], bernoulli_out_sp)?;
    r.register_all("Bernoulli", "out", mm, &[("q_p", &[Family::Beta, Family::PointMass])], bernoulli_out_mf)?;
    let t = "Transition";
    r.register_all(t, "out", mm, &[("m_in", CAT), ("q_a", MATRIX)], out_sp)?;
    r.register_all(t, "in", mm, &[("m_out", CAT), ("q_a", MATRIX)], in_sp)?;
    r.register_all(t, "out", mm, &[("q_in", CAT), ("q_a", MATRIX)], out_mf)?;
    r.register_all(t, "in", mm, &[("q_out", CAT), ("q_a", MATRIX)], in_mf)?;
    r.register_all(t, "a", mm, &[("q_out_in", &[Family::Contingency])], a_sf)?;
    r.register_all(t, "a", mm, &[("q_out", CAT), ("q_in", CAT)], a_mf)?;
    r.register_all(t, "out_in", mm, &[("m_out", CAT), ("m_in", CAT), ("q_a", MATRIX)], joint_out_in)?;
    Ok(())
}
