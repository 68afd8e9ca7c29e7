//! `N(out | mean, precision⁻¹)`.

use nalgebra::{DMatrix, DVector};

use super::{positive_precision, scalar_moments, Constraint, Registry, RuleCtx, GAUSS};
use crate::dist::{Distribution, Family};
use crate::error::Result;

const NODE: &str = "GaussianMeanPrecision";
const PRECISION: &[Family] = &[Family::Gamma, Family::PointMass];

fn expected_precision(d: &Distribution) -> Result<f64> {
    positive_precision(d.mean_scalar()?, "expected precision")
}

/// `E[(out - mean)²]` under independent marginals.
pub(crate) fn squared_gap(a: &Distribution, b: &Distribution) -> Result<f64> {
    let (ma, va) = scalar_moments(a)?;
    let (mb, vb) = scalar_moments(b)?;
    Ok((ma - mb).powi(2) + va + vb)
}

/// `E[(x₀ - x₁)²]` under a bivariate Gaussian.
pub(crate) fn squared_gap_joint(q: &Distribution) -> Result<f64> {
    let m = q.mean_vector()?;
    let c = q.cov_matrix()?;
    if m.len() != 2 {
        return Err(crate::Error::Domain(format!("expected a bivariate joint, got dimension {}", m.len())));
    }
    Ok((m[0] - m[1]).powi(2) + c[(0, 0)] + c[(1, 1)] - 2.0 * c[(0, 1)])
}

fn through(msg: &Distribution, w: f64) -> Result<Distribution> {
    let (m, v) = scalar_moments(msg)?;
    Distribution::normal_mean_variance(m, v + 1.0 / w)
}

fn out_sp(c: &RuleCtx) -> Result<Distribution> {
    through(c.get("m_mean")?, expected_precision(c.get("q_precision")?)?)
}

fn mean_sp(c: &RuleCtx) -> Result<Distribution> {
    through(c.get("m_out")?, expected_precision(c.get("q_precision")?)?)
}

fn out_mf(c: &RuleCtx) -> Result<Distribution> {
    Distribution::normal_mean_precision(c.get("q_mean")?.mean_scalar()?, expected_precision(c.get("q_precision")?)?)
}

fn mean_mf(c: &RuleCtx) -> Result<Distribution> {
    Distribution::normal_mean_precision(c.get("q_out")?.mean_scalar()?, expected_precision(c.get("q_precision")?)?)
}

pub(crate) fn precision_message(psi: f64) -> Result<Distribution> {
    Distribution::gamma(1.5, 0.5 * psi)
}

fn precision_sf(c: &RuleCtx) -> Result<Distribution> {
    precision_message(squared_gap_joint(c.get("q_out_mean")?)?)
}

fn precision_mf(c: &RuleCtx) -> Result<Distribution> {
    precision_message(squared_gap(c.get("q_out")?, c.get("q_mean")?)?)
}

/// Bivariate joint `∝ m_a(x₀) m_b(x₁) exp(-w/2 (x₀ - x₁)²)`.
pub(crate) fn coupled_joint(a: &Distribution, b: &Distribution, w: f64) -> Result<Distribution> {
    let ga = a.as_gaussian()?;
    let gb = b.as_gaussian()?;
    let prec = DMatrix::from_row_slice(2, 2, &[w + ga.precision(), -w, -w, w + gb.precision()]);
    let xi = DVector::from_vec(vec![ga.weighted_mean(), gb.weighted_mean()]);
    Distribution::mv_normal_weighted(xi, prec)
}

fn joint_out_mean(c: &RuleCtx) -> Result<Distribution> {
    coupled_joint(c.get("m_out")?, c.get("m_mean")?, expected_precision(c.get("q_precision")?)?)
}

pub(super) fn register(r: &mut Registry) -> Result<()> {
    let mm = Constraint::Marginalization;
    r.register_all(NODE, "out", mm, &[("m_mean", GAUSS), ("q_precision", PRECISION)], out_sp)?;
    r.register_all(NODE, "mean", mm, &[("m_out", GAUSS), ("q_precision", PRECISION)], mean_sp)?;
    r.register_all(NODE, "out", mm, &[("q_mean", GAUSS), ("q_precision", PRECISION)], out_mf)?;
    r.register_all(NODE, "mean", mm, &[("q_out", GAUSS), ("q_precision", PRECISION)], mean_mf)?;
    r.register_all(NODE, "precision", mm, &[("q_out_mean", &[Family::MvGaussian])], precision_sf)?;
    r.register_all(NODE, "precision", mm, &[("q_out", GAUSS), ("q_mean", GAUSS)], precision_mf)?;
    r.register_all(
        NODE,
        "out_mean",
        mm,
        &[("m_out", &[Family::Gaussian]), ("m_mean", &[Family::Gaussian]), ("q_precision", PRECISION)],
        joint_out_mean,
    )?;
    Ok(())
}
