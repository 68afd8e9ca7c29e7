//! Node average energies `-E_q[log f]` and cross-entropies.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use super::discrete::{expected_log_matrix, probs, weighted_log};
use super::gcv::{gh_points, link};
use super::{mv, scalar_moments};
use crate::dist::linalg::{inv_pd, logdet_pd};
use crate::dist::{Distribution, Point};
use crate::error::{Error, Result};
use crate::model::{FactorKind, Meta};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Beliefs over a node's interfaces: one distribution per cluster, with the
/// interface indices it covers (ascending). Data and constant interfaces
/// appear as singleton point masses.
pub type Beliefs = [(Vec<usize>, Distribution)];

fn find(b: &Beliefs, i: usize) -> Result<(usize, usize)> {
    for (c, (ifaces, _)) in b.iter().enumerate() {
        if let Some(pos) = ifaces.iter().position(|&x| x == i) {
            return Ok((c, pos));
        }
    }
    Err(Error::Fault(format!("no belief covers interface {i}")))
}

fn singleton(b: &Beliefs, i: usize, what: &str) -> Result<Distribution> {
    let (c, _) = find(b, i)?;
    if b[c].0.len() != 1 {
        return Err(Error::NoRule(format!("average energy with {what} inside a joint cluster")));
    }
    Ok(b[c].1.clone())
}

fn iface_dim(kind: &FactorKind, i: usize) -> usize {
    match kind {
        FactorKind::MvGaussianMeanCovariance { transform, covariance } => match (i, transform) {
            (0, _) => covariance.nrows(),
            (_, Some(h)) => h.ncols(),
            (_, None) => covariance.nrows(),
        },
        _ => 1,
    }
}

/// Mean and covariance of the stacked interfaces, with zero cross-covariance
/// between different clusters.
fn stacked(kind: &FactorKind, b: &Beliefs, ifaces: &[usize]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dims: Vec<usize> = ifaces.iter().map(|&i| iface_dim(kind, i)).collect();
    let total: usize = dims.iter().sum();
    let mut mean = DVector::zeros(total);
    let mut cov = DMatrix::zeros(total, total);
    let offsets: Vec<usize> = dims.iter().scan(0, |acc, d| { let o = *acc; *acc += d; Some(o) }).collect();
    let mut moments: Vec<Option<(DVector<f64>, DMatrix<f64>)>> = vec![None; b.len()];
    let locate = |i: usize, moments: &mut Vec<Option<(DVector<f64>, DMatrix<f64>)>>| -> Result<(usize, usize)> {
        let (c, pos) = find(b, i)?;
        if moments[c].is_none() {
            moments[c] = Some((b[c].1.mean_vector()?, b[c].1.cov_matrix()?));
        }
        let within: usize = b[c].0[..pos].iter().map(|&j| iface_dim(kind, j)).sum();
        Ok((c, within))
    };
    let mut where_: Vec<(usize, usize)> = Vec::with_capacity(ifaces.len());
    for &i in ifaces {
        where_.push(locate(i, &mut moments)?);
    }
    for (a, &(ca, wa)) in where_.iter().enumerate() {
        let (m, c) = moments[ca].as_ref().expect("filled above");
        if m.len() < wa + dims[a] {
            return Err(Error::Domain(format!("belief of dimension {} is too small for interface {}", m.len(), ifaces[a])));
        }
        mean.rows_mut(offsets[a], dims[a]).copy_from(&m.rows(wa, dims[a]));
        for (bb, &(cb, wb)) in where_.iter().enumerate() {
            if cb == ca {
                cov.view_mut((offsets[a], offsets[bb]), (dims[a], dims[bb])).copy_from(&c.view((wa, wb), (dims[a], dims[bb])));
            }
        }
    }
    Ok((mean, cov))
}

/// `E[(x₀ - x₁)²]` for two scalar interfaces.
fn squared_gap(kind: &FactorKind, b: &Beliefs, i: usize, j: usize) -> Result<f64> {
    let (m, c) = stacked(kind, b, &[i, j])?;
    Ok((m[0] - m[1]).powi(2) + c[(0, 0)] + c[(1, 1)] - 2.0 * c[(0, 1)])
}

fn scalar_elog(d: &Distribution) -> Result<f64> {
    d.expectation_log()?.as_scalar()
}

/// `(E log p, E log(1 - p))` for a Beta belief or a point in `[0, 1]`.
fn beta_elogs(d: &Distribution) -> Result<(f64, f64)> {
    match d {
        Distribution::PointMass(p) => {
            let p = p.as_scalar()?;
            Ok((p.ln(), (1.0 - p).ln()))
        }
        _ => {
            let e = d.expectation_log()?.as_vector()?;
            Ok((e[0], e[1]))
        }
    }
}

fn dirichlet_cross(alpha: &[f64], elog: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    -(ln_gamma(a0) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
        + alpha.iter().zip(elog).map(|(a, l)| weighted_log(a - 1.0, *l)).sum::<f64>())
}

/// `-E_q[log p]`.
pub fn cross_entropy(q: &Distribution, p: &Distribution) -> Result<f64> {
    if let Distribution::PointMass(x) = q {
        return Ok(-p.log_pdf(x)?);
    }
    Ok(match p {
        Distribution::Gaussian(g) => {
            let (m, v) = scalar_moments(q)?;
            0.5 * LN_2PI + 0.5 * g.var().ln() + 0.5 * ((m - g.mean()).powi(2) + v) / g.var()
        }
        Distribution::MvGaussian(_) => {
            let (mp, sp) = (p.mean_vector()?, p.cov_matrix()?);
            let (mq, sq) = (q.mean_vector()?, q.cov_matrix()?);
            let d = mp.len() as f64;
            let delta = mq - mp;
            let second = sq + &delta * delta.transpose();
            0.5 * d * LN_2PI + 0.5 * logdet_pd(&sp)? + 0.5 * (inv_pd(&sp)? * second).trace()
        }
        Distribution::Gamma { shape: a, rate: b } => {
            -(a * b.ln() - ln_gamma(*a) + (a - 1.0) * scalar_elog(q)? - b * q.mean_scalar()?)
        }
        Distribution::Beta { a, b } => {
            let (l1, l0) = beta_elogs(q)?;
            ln_beta(*a, *b) - weighted_log(a - 1.0, l1) - weighted_log(b - 1.0, l0)
        }
        Distribution::Bernoulli { p } => {
            let y = q.mean_scalar()?;
            -(weighted_log(y, p.ln()) + weighted_log(1.0 - y, (1.0 - p).ln()))
        }
        Distribution::Categorical(c) => {
            let qp = probs(q)?;
            -qp.iter().zip(c.log_probs().iter()).map(|(w, l)| weighted_log(*w, *l)).sum::<f64>()
        }
        Distribution::Dirichlet(alpha) => {
            let el = q.expectation_log()?.as_vector()?;
            dirichlet_cross(alpha.as_slice(), el.as_slice())
        }
        Distribution::MatrixDirichlet(alpha) => {
            let el = expected_log_matrix(q)?;
            alpha
                .column_iter()
                .zip(el.column_iter())
                .map(|(a, l)| dirichlet_cross(a.clone_owned().as_slice(), l.clone_owned().as_slice()))
                .sum()
        }
        other => return Err(Error::NoRule(format!("cross-entropy against {}", other.family()))),
    })
}

/// Average energy `U = -E_q[log f]` of one node under its cluster beliefs.
pub fn average_energy(kind: &FactorKind, meta: &Meta, b: &Beliefs) -> Result<f64> {
    match kind {
        FactorKind::Prior(p) => cross_entropy(&singleton(b, 0, "a prior")?, p),
        FactorKind::GaussianMeanPrecision => {
            let w = singleton(b, 2, "the precision")?;
            let psi = squared_gap(kind, b, 0, 1)?;
            let (ew, elw) = match &w {
                Distribution::PointMass(x) => {
                    let x = x.as_scalar()?;
                    (x, x.ln())
                }
                _ => (w.mean_scalar()?, scalar_elog(&w)?),
            };
            Ok(0.5 * LN_2PI - 0.5 * elw + 0.5 * ew * psi)
        }
        FactorKind::MvGaussianMeanCovariance { .. } => {
            let dm = iface_dim(kind, 1);
            let p = mv::params(kind, Some(dm))?;
            let d = p.sigma.nrows();
            let (m, c) = stacked(kind, b, &[0, 1])?;
            let mut s = DMatrix::zeros(d, d + dm);
            s.view_mut((0, 0), (d, d)).fill_with_identity();
            s.view_mut((0, d), (d, dm)).copy_from(&(-&p.h));
            let second = &s * (c + &m * m.transpose()) * s.transpose();
            Ok(0.5 * d as f64 * LN_2PI + 0.5 * logdet_pd(&p.sigma)? + 0.5 * (p.sigma_inv * second).trace())
        }
        FactorKind::Gcv { .. } => {
            let (k, w) = link(kind)?;
            let z = singleton(b, 2, "z")?;
            let psi = squared_gap(kind, b, 0, 1)?;
            let gamma = super::gcv::expected_precision_factor(&z, k, w, gh_points(meta))?;
            Ok(0.5 * LN_2PI + 0.5 * (k * z.mean_scalar()? + w) + 0.5 * psi * gamma)
        }
        FactorKind::Transition => {
            let la = expected_log_matrix(&singleton(b, 2, "the transition matrix")?)?;
            let (c, _) = find(b, 0)?;
            let joint = if b[c].0 == [0, 1] {
                match &b[c].1 {
                    Distribution::Contingency(j) => j.clone(),
                    other => return Err(Error::Domain(format!("expected Contingency, got {}", other.family()))),
                }
            } else {
                probs(&singleton(b, 0, "out")?)? * probs(&singleton(b, 1, "in")?)?.transpose()
            };
            if joint.shape() != la.shape() {
                return Err(Error::Domain("transition joint and matrix shapes differ".into()));
            }
            Ok(-joint.iter().zip(la.iter()).map(|(j, l)| weighted_log(*j, *l)).sum::<f64>())
        }
        FactorKind::Beta => {
            let a = singleton(b, 1, "a")?.mean_scalar()?;
            let bb = singleton(b, 2, "b")?.mean_scalar()?;
            cross_entropy(&singleton(b, 0, "out")?, &Distribution::beta(a, bb)?)
        }
        FactorKind::Bernoulli => {
            let y = singleton(b, 0, "out")?.mean_scalar()?;
            let (l1, l0) = beta_elogs(&singleton(b, 1, "p")?)?;
            Ok(-(weighted_log(y, l1) + weighted_log(1.0 - y, l0)))
        }
    }
}

/// Shorthand for a point-mass belief.
pub fn point_belief(i: usize, p: impl Into<Point>) -> (Vec<usize>, Distribution) {
    (vec![i], Distribution::point(p))
}
