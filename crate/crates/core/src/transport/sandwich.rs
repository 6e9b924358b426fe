use serde::Serialize;

use super::{dyadic_bound, exact_wp, moser_upper_bound, separated_lower_bound, MeasureRef};
use crate::besov::{besov_distance, BesovParams};
use crate::density::{Box, GridDensity};
use crate::error::{arg, Error, Result};
use crate::estimators::DiscreteMeasure;

/// Violations beyond this are solver bugs.
const CERT_TOL: f64 = 1e-9;

/// Every computable quantity for one pair of grid densities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRecord {
    pub p: f64,
    #[serde(rename = "R")]
    pub level: u32,
    /// `W_p` between the cell-centre discretisations.
    pub exact: f64,
    pub besov_one: f64,
    pub besov_inf: f64,
    /// Only when `m > 0`.
    pub moser_ub: Option<f64>,
    pub dyadic_ub: f64,
    pub separated_lb: Option<f64>,
    /// `sqrt(d) 2^{-R}`: gap between the discretised and continuous distance.
    pub slack: f64,
    /// `W_p / B^{-1}_{p,inf}`.
    pub ratio_inf: Option<f64>,
    /// `B^{-1}_{p,1} / W_p`.
    pub ratio_one: Option<f64>,
}

/// Exact distance, Besov distances and all applicable bounds for `f, g` with
/// `m <= f, g <= m_ub`. Fails with a certificate error if a certified
/// ordering is violated.
pub fn sandwich_report(
    f: &GridDensity,
    g: &GridDensity,
    m: f64,
    m_ub: f64,
    p: f64,
    separation: Option<(&[Box], &[Box])>,
) -> Result<SandwichRecord> {
    if f.d() != g.d() {
        return arg("densities differ in dimension");
    }
    let level = f.level().max(g.level());
    let (f, g) = (f.refine(level)?, g.refine(level)?);
    for (name, h) in [("f", &f), ("g", &g)] {
        if h.min() < m - 1e-12 || h.max() > m_ub + 1e-12 {
            return arg(format!("{name} ranges over [{}, {}], outside [{m}, {m_ub}]", h.min(), h.max()));
        }
    }
    let (cf, cg) = (f.coefficients(), g.coefficients());
    let besov_one = besov_distance(&cf, &cg, &BesovParams::dual_one(p))?;
    let besov_inf = besov_distance(&cf, &cg, &BesovParams::dual_inf(p))?;

    let mu = DiscreteMeasure::from_grid(f.function())?;
    let nu = DiscreteMeasure::from_grid(g.function())?;
    let exact = exact_wp(&mu, &nu, p)?.0;
    let d = f.d();
    let top = (level + 20).min((63 / d) as u32);
    let dyadic_ub = dyadic_bound(MeasureRef::Atoms(&mu), MeasureRef::Atoms(&nu), p, Some(top))?;
    let slack = (d as f64).sqrt() * (-(level as f64)).exp2();
    let moser_ub = if m > 0.0 { Some(moser_upper_bound(&cf, &cg, m, p)?) } else { None };
    let separated_lb = match separation {
        Some((s, t)) => Some(separated_lower_bound(&mu, &nu, s, t, p)?),
        None => None,
    };

    let tol = CERT_TOL * exact.max(1.0);
    if exact > dyadic_ub + tol {
        return Err(Error::Certificate(format!("exact {exact} above dyadic bound {dyadic_ub}")));
    }
    if let Some(lb) = separated_lb {
        if lb > exact + tol {
            return Err(Error::Certificate(format!("separated bound {lb} above exact {exact}")));
        }
    }
    if let Some(ub) = moser_ub {
        if exact > ub + slack + tol {
            return Err(Error::Certificate(format!("exact {exact} above flow bound {ub} + slack {slack}")));
        }
    }
    let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    Ok(SandwichRecord {
        p,
        level,
        exact,
        besov_one,
        besov_inf,
        moser_ub,
        dyadic_ub,
        separated_lb,
        slack,
        ratio_inf: ratio(exact, besov_inf),
        ratio_one: ratio(besov_one, exact),
    })
}
