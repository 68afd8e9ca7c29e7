//! `N(out | H·mean, Σ)` with fixed `H` and `Σ`.

use nalgebra::{DMatrix, DVector};

use super::{Constraint, Registry, RuleCtx};
use crate::dist::linalg::{inv_pd, symmetrize};
use crate::dist::{Distribution, Family, MvGaussian};
use crate::error::{Error, Result};
use crate::model::FactorKind;

const NODE: &str = "MvGaussianMeanCovariance";
const MV: &[Family] = &[Family::MvGaussian];
const MV_OR_POINT: &[Family] = &[Family::MvGaussian, Family::PointMass];
const POINT: &[Family] = &[Family::PointMass];

pub(crate) struct Params {
    pub h: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_inv: DMatrix<f64>,
}

pub(crate) fn params(kind: &FactorKind, dim_mean: Option<usize>) -> Result<Params> {
    let FactorKind::MvGaussianMeanCovariance { transform, covariance } = kind else {
        return Err(Error::Fault(format!("{} is not an MvGaussianMeanCovariance node", kind.tag())));
    };
    let d = covariance.nrows();
    let h = match transform {
        Some(h) => h.clone(),
        None => DMatrix::identity(d, dim_mean.unwrap_or(d)),
    };
    if let Some(k) = dim_mean {
        if h.ncols() != k {
            return Err(Error::Domain(format!("transform has {} columns, mean has dimension {k}", h.ncols())));
        }
    }
    Ok(Params { sigma_inv: inv_pd(covariance)?, sigma: covariance.clone(), h })
}

fn point_vec(d: &Distribution) -> Result<DVector<f64>> {
    d.as_point()?.as_vector()
}

fn forward(c: &RuleCtx, m: &MvGaussian) -> Result<Distribution> {
    let p = params(c.kind, Some(m.dim()))?;
    if m.is_proper() {
        let (mu, v) = m.moments()?;
        return Distribution::mv_normal_mean_cov(&p.h * mu, &p.h * v * p.h.transpose() + &p.sigma);
    }
    let (xi, w) = m.natural()?;
    let sh = &p.sigma_inv * &p.h;
    let inner = inv_pd(&(w + p.h.transpose() * &sh))?;
    let prec = &p.sigma_inv - &sh * &inner * sh.transpose();
    let xi_out = &sh * inner * xi;
    Distribution::mv_normal_weighted(xi_out, symmetrize(&prec))
}

fn out_sp(c: &RuleCtx) -> Result<Distribution> {
    forward(c, &c.get("m_mean")?.as_mv_gaussian()?)
}

fn out_point(c: &RuleCtx, name: &str) -> Result<Distribution> {
    let x = point_vec(c.get(name)?)?;
    let p = params(c.kind, Some(x.len()))?;
    Distribution::mv_normal_mean_cov(&p.h * x, p.sigma)
}

fn out_from_m_point(c: &RuleCtx) -> Result<Distribution> {
    out_point(c, "m_mean")
}

fn out_mf(c: &RuleCtx) -> Result<Distribution> {
    let q = c.get("q_mean")?;
    if q.is_point_mass() {
        return out_point(c, "q_mean");
    }
    let mu = q.mean_vector()?;
    let p = params(c.kind, Some(mu.len()))?;
    Distribution::mv_normal_mean_cov(&p.h * mu, p.sigma)
}

fn backward(c: &RuleCtx, m: &MvGaussian) -> Result<Distribution> {
    let p = params(c.kind, None)?;
    let (xi, w) = m.natural()?;
    let d = w.nrows();
    let a = DMatrix::<f64>::identity(d, d) + &p.sigma * &w;
    let lu = a.clone().lu();
    let solved = lu.solve(&p.h).ok_or_else(|| Error::Numerical("singular I + ΣW in backward message".into()))?;
    let prec = p.h.transpose() * &w * solved;
    let b = DMatrix::<f64>::identity(d, d) + &w * &p.sigma;
    let xi_b = b.lu().solve(&xi).ok_or_else(|| Error::Numerical("singular I + WΣ in backward message".into()))?;
    Distribution::mv_normal_weighted(p.h.transpose() * xi_b, symmetrize(&prec))
}

fn mean_sp(c: &RuleCtx) -> Result<Distribution> {
    backward(c, &c.get("m_out")?.as_mv_gaussian()?)
}

fn mean_from(c: &RuleCtx, y: DVector<f64>) -> Result<Distribution> {
    let p = params(c.kind, None)?;
    let ht = p.h.transpose();
    Distribution::mv_normal_weighted(&ht * &p.sigma_inv * y, symmetrize(&(&ht * &p.sigma_inv * &p.h)))
}

fn mean_from_point(c: &RuleCtx) -> Result<Distribution> {
    let name = if c.inputs.iter().any(|(n, _)| n == "q_out") { "q_out" } else { "m_out" };
    mean_from(c, point_vec(c.get(name)?)?)
}

fn mean_mf(c: &RuleCtx) -> Result<Distribution> {
    mean_from(c, c.get("q_out")?.mean_vector()?)
}

/// Joint over `(out, mean)` from both inbound messages.
fn joint(c: &RuleCtx) -> Result<Distribution> {
    let mo = c.get("m_out")?.as_mv_gaussian()?;
    let mm = c.get("m_mean")?.as_mv_gaussian()?;
    let (xo, wo) = mo.natural()?;
    let (xm, wm) = mm.natural()?;
    let p = params(c.kind, Some(mm.dim()))?;
    let (dout, dm) = (wo.nrows(), wm.nrows());
    let mut prec = DMatrix::zeros(dout + dm, dout + dm);
    let sh = &p.sigma_inv * &p.h;
    prec.view_mut((0, 0), (dout, dout)).copy_from(&(&p.sigma_inv + &wo));
    prec.view_mut((0, dout), (dout, dm)).copy_from(&(-&sh));
    prec.view_mut((dout, 0), (dm, dout)).copy_from(&(-sh.transpose()));
    prec.view_mut((dout, dout), (dm, dm)).copy_from(&(p.h.transpose() * &sh + &wm));
    let mut xi = DVector::zeros(dout + dm);
    xi.rows_mut(0, dout).copy_from(&xo);
    xi.rows_mut(dout, dm).copy_from(&xm);
    Distribution::mv_normal_weighted(xi, symmetrize(&prec))
}

pub(super) fn register(r: &mut Registry) -> Result<()> {
    let mm = Constraint::Marginalization;
    r.register_all(NODE, "out", mm, &[("m_mean", MV)], out_sp)?;
    r.register_all(NODE, "out", mm, &[("m_mean", POINT)], out_from_m_point)?;
    r.register_all(NODE, "out", mm, &[("q_mean", MV_OR_POINT)], out_mf)?;
    r.register_all(NODE, "mean", mm, &[("m_out", MV)], mean_sp)?;
    r.register_all(NODE, "mean", mm, &[("m_out", POINT)], mean_from_point)?;
    r.register_all(NODE, "mean", mm, &[("q_out", POINT)], mean_from_point)?;
    r.register_all(NODE, "mean", mm, &[("q_out", MV)], mean_mf)?;
    r.register_all(NODE, "out_mean", mm, &[("m_out", MV), ("m_mean", MV)], joint)?;
    Ok(())
}
