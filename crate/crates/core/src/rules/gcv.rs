//! Gaussian controlled variance: `N(out | in, exp(κ·z + ω))`.
//!
//! Expectations over `z` use Gauss-Hermite quadrature with `meta.gh_points`
//! nodes. The `z` message depends on the form constraint of `z`:
//! - moment matching: the tilted density `m_z(z)·exp(E log f)` is matched to
//!   a Gaussian and divided by the cavity `m_z`;
//! - Gaussian marginal: the Gaussian `q` minimizing `KL(q ‖ tilted)` (the
//!   free energy restricted to Gaussian `q(z)`) is divided by `m_z`.

use std::f64::consts::PI;

use super::gaussian::{coupled_joint, squared_gap, squared_gap_joint};
use super::{positive_precision, scalar_moments, Constraint, Registry, RuleCtx, GAUSS};
use crate::dist::{log_sum_exp, Distribution, Family, GaussHermite};
use crate::error::{Error, Result};
use crate::model::{FactorKind, Meta};

pub const DEFAULT_GH_POINTS: usize = 21;
const NODE: &str = "GCV";
const PRECISION_FLOOR: f64 = 1e-12;

pub(crate) fn link(kind: &FactorKind) -> Result<(f64, f64)> {
    match kind {
        FactorKind::Gcv { kappa, omega } => Ok((*kappa, *omega)),
        k => Err(Error::Fault(format!("{} is not a GCV node", k.tag()))),
    }
}

pub(crate) fn gh_points(meta: &Meta) -> usize {
    meta.gh_points.unwrap_or(DEFAULT_GH_POINTS)
}

/// `E[exp(-κz - ω)]` under `q_z`, by quadrature.
pub fn expected_precision_factor(q_z: &Distribution, kappa: f64, omega: f64, points: usize) -> Result<f64> {
    let (m, v) = scalar_moments(q_z)?;
    let g = if v == 0.0 {
        (-kappa * m - omega).exp()
    } else {
        GaussHermite::cached(points)?.expect_normal(m, v, |z| (-kappa * z - omega).exp())
    };
    if g.is_nan() {
        return Err(Error::Numerical("GCV precision expectation is NaN".into()));
    }
    positive_precision(g, "GCV expected precision")
}

fn gamma(c: &RuleCtx) -> Result<f64> {
    let (k, w) = link(c.kind)?;
    expected_precision_factor(c.get("q_z")?, k, w, gh_points(c.meta))
}

fn out_sf(c: &RuleCtx) -> Result<Distribution> {
    let (m, v) = scalar_moments(c.get("m_in")?)?;
    Distribution::normal_mean_variance(m, v + 1.0 / gamma(c)?)
}

fn in_sf(c: &RuleCtx) -> Result<Distribution> {
    let (m, v) = scalar_moments(c.get("m_out")?)?;
    Distribution::normal_mean_variance(m, v + 1.0 / gamma(c)?)
}

fn out_mf(c: &RuleCtx) -> Result<Distribution> {
    Distribution::normal_mean_precision(c.get("q_in")?.mean_scalar()?, gamma(c)?)
}

fn in_mf(c: &RuleCtx) -> Result<Distribution> {
    Distribution::normal_mean_precision(c.get("q_out")?.mean_scalar()?, gamma(c)?)
}

fn joint_out_in(c: &RuleCtx) -> Result<Distribution> {
    coupled_joint(c.get("m_out")?, c.get("m_in")?, gamma(c)?)
}

fn laplace(mc: f64, vc: f64, psi: f64, kappa: f64, omega: f64) -> Result<(f64, f64)> {
    let log_t = |z: f64| -0.5 * (z - mc).powi(2) / vc - 0.5 * kappa * z - 0.5 * psi * (-kappa * z - omega).exp();
    let grad = |z: f64| -(z - mc) / vc - 0.5 * kappa + 0.5 * psi * kappa * (-kappa * z - omega).exp();
    let curv = |z: f64| -1.0 / vc - 0.5 * psi * kappa * kappa * (-kappa * z - omega).exp();
    let mut z = mc;
    for _ in 0..200 {
        let step = -grad(z) / curv(z);
        if !step.is_finite() {
            break;
        }
        let mut t = 1.0;
        while t > 1e-10 && log_t(z + t * step).partial_cmp(&log_t(z)) == Some(std::cmp::Ordering::Less) {
            t *= 0.5;
        }
        z += t * step;
        if (t * step).abs() <= 1e-13 * (1.0 + z.abs()) {
            break;
        }
    }
    let s2 = -1.0 / curv(z);
    if !(s2 > 0.0 && s2.is_finite() && z.is_finite()) {
        return Err(Error::Numerical("GCV tilted density has no finite mode".into()));
    }
    Ok((z, s2))
}

/// Gaussian projection of `N(z | μc, vc)·exp(-κz/2 - ψ/2·exp(-κz - ω))`.
pub(crate) fn tilted_moments(mc: f64, vc: f64, psi: f64, kappa: f64, omega: f64, points: usize) -> Result<(f64, f64)> {
    let log_t = |z: f64| -0.5 * (z - mc).powi(2) / vc - 0.5 * kappa * z - 0.5 * psi * (-kappa * z - omega).exp();
    let (z, s2) = laplace(mc, vc, psi, kappa, omega)?;
    let gh = GaussHermite::cached(points)?;
    let s = (2.0 * s2).sqrt();
    let nodes: Vec<f64> = gh.nodes.iter().map(|x| z + s * x).collect();
    let logw: Vec<f64> = gh
        .nodes
        .iter()
        .zip(&gh.weights)
        .zip(&nodes)
        .map(|((x, w), zk)| w.ln() - 0.5 * PI.ln() + x * x + log_t(*zk))
        .collect();
    let lz = log_sum_exp(&logw);
    let w: Vec<f64> = logw.iter().map(|l| (l - lz).exp()).collect();
    let mean: f64 = w.iter().zip(&nodes).map(|(w, z)| w * z).sum();
    let var: f64 = w.iter().zip(&nodes).map(|(w, z)| w * (z - mean).powi(2)).sum();
    if mean.is_nan() || var.is_nan() {
        return Err(Error::Numerical("GCV tilted moments are NaN".into()));
    }
    Ok((mean, var.max(PRECISION_FLOOR * s2)))
}

/// Gaussian `N(μ, v)` minimizing `KL(N ‖ tilted)`, with `E[exp(-κz)]` taken by
/// the same quadrature as the node energy. The objective is convex in
/// `(μ, √(2v))`; solved by damped Newton from the Laplace point.
pub(crate) fn kl_projection(mc: f64, vc: f64, psi: f64, kappa: f64, omega: f64, points: usize) -> Result<(f64, f64)> {
    let gh = GaussHermite::cached(points)?;
    let w: Vec<f64> = gh.weights.iter().map(|w| w / PI.sqrt()).collect();
    let objective = |m: f64, s: f64| {
        let g: f64 = w.iter().zip(&gh.nodes).map(|(w, x)| w * (-kappa * (m + s * x) - omega).exp()).sum();
        ((m - mc).powi(2) + 0.5 * s * s) / (2.0 * vc) + 0.5 * kappa * m + 0.5 * psi * g - s.ln()
    };
    let (z, s2) = laplace(mc, vc, psi, kappa, omega)?;
    let (mut m, mut s) = (z, (2.0 * s2).sqrt());
    let mut f = objective(m, s);
    for _ in 0..100 {
        let (mut g0, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for (wi, x) in w.iter().zip(&gh.nodes) {
            let e = wi * (-kappa * (m + s * x) - omega).exp();
            g0 += e;
            g1 += x * e;
            g2 += x * x * e;
        }
        let c = 0.5 * psi * kappa;
        let grad = [(m - mc) / vc + 0.5 * kappa - c * g0, s / (2.0 * vc) - 1.0 / s - c * g1];
        let h = [1.0 / vc + c * kappa * g0, c * kappa * g1, 1.0 / (2.0 * vc) + 1.0 / (s * s) + c * kappa * g2];
        let det = h[0] * h[2] - h[1] * h[1];
        let step = [-(h[2] * grad[0] - h[1] * grad[1]) / det, -(h[0] * grad[1] - h[1] * grad[0]) / det];
        if !(step[0].is_finite() && step[1].is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let (m1, s1) = (m + t * step[0], s + t * step[1]);
            if s1 > 0.0 {
                let f1 = objective(m1, s1);
                if f1 <= f {
                    m = m1;
                    s = s1;
                    f = f1;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted || (t * step[0]).abs().max((t * step[1]).abs()) <= 1e-14 * (1.0 + m.abs() + s) {
            break;
        }
    }
    let v = 0.5 * s * s;
    if !(m.is_finite() && v > 0.0 && v.is_finite()) {
        return Err(Error::Numerical("GCV Gaussian projection diverged".into()));
    }
    Ok((m, v))
}

type Projection = fn(f64, f64, f64, f64, f64, usize) -> Result<(f64, f64)>;

fn z_message(c: &RuleCtx, psi: f64, project: Projection) -> Result<Distribution> {
    let (k, w) = link(c.kind)?;
    let (mc, vc) = scalar_moments(c.get("m_z")?)?;
    if vc <= 0.0 {
        return Err(Error::Precondition("GCV z cavity must have positive variance".into()));
    }
    let (m, v) = project(mc, vc, psi, k, w, gh_points(c.meta))?;
    let mut prec = 1.0 / v - 1.0 / vc;
    let mut xi = m / v - mc / vc;
    if !(prec >= PRECISION_FLOOR) {
        prec = PRECISION_FLOOR;
        xi = PRECISION_FLOOR * m;
    }
    Distribution::normal_weighted(xi, prec)
}

fn z_sf(c: &RuleCtx) -> Result<Distribution> {
    z_message(c, squared_gap_joint(c.get("q_out_in")?)?, tilted_moments)
}

fn z_mf(c: &RuleCtx) -> Result<Distribution> {
    z_message(c, squared_gap(c.get("q_out")?, c.get("q_in")?)?, tilted_moments)
}

fn z_sf_kl(c: &RuleCtx) -> Result<Distribution> {
    z_message(c, squared_gap_joint(c.get("q_out_in")?)?, kl_projection)
}

fn z_mf_kl(c: &RuleCtx) -> Result<Distribution> {
    z_message(c, squared_gap(c.get("q_out")?, c.get("q_in")?)?, kl_projection)
}

pub(super) fn register(r: &mut Registry) -> Result<()> {
    let mm = Constraint::Marginalization;
    let ep = Constraint::MomentMatching;
    r.register_all(NODE, "out", mm, &[("m_in", GAUSS), ("q_z", GAUSS)], out_sf)?;
    r.register_all(NODE, "in", mm, &[("m_out", GAUSS), ("q_z", GAUSS)], in_sf)?;
    r.register_all(NODE, "out", mm, &[("q_in", GAUSS), ("q_z", GAUSS)], out_mf)?;
    r.register_all(NODE, "in", mm, &[("q_out", GAUSS), ("q_z", GAUSS)], in_mf)?;
    r.register_all(
        NODE,
        "out_in",
        mm,
        &[("m_out", &[Family::Gaussian]), ("m_in", &[Family::Gaussian]), ("q_z", GAUSS)],
        joint_out_in,
    )?;
    r.register_all(NODE, "z", ep, &[("m_z", &[Family::Gaussian]), ("q_out_in", &[Family::MvGaussian])], z_sf)?;
    r.register_all(NODE, "z", ep, &[("m_z", &[Family::Gaussian]), ("q_out", GAUSS), ("q_in", GAUSS)], z_mf)?;
    let fixed = Constraint::GaussianForm;
    r.register_all(NODE, "z", fixed, &[("m_z", &[Family::Gaussian]), ("q_out_in", &[Family::MvGaussian])], z_sf_kl)?;
    r.register_all(NODE, "z", fixed, &[("m_z", &[Family::Gaussian]), ("q_out", GAUSS), ("q_in", GAUSS)], z_mf_kl)?;
    Ok(())
}
