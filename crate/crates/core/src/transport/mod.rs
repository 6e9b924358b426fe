//! Wasserstein distances and certified bounds.
//!
//! | Function | Returns |
//! |----------|---------|
//! | [`exact_wp`] | `W_p` with an optimal plan and a dual certificate |
//! | [`wp_1d`] | `W_p` on the line by quantile coupling |
//! | [`sinkhorn_wp`] | `W_p^p` within an additive `eps`, from a feasible plan |
//! | [`dyadic_upper_bound`] | hierarchical-matching upper bound |
//! | [`separated_lower_bound`] | lower bound for measures on separated box sets |
//! | [`moser_upper_bound`] | flow-based upper bound for densities bounded below |
//!
//! Costs are `||x - y||^p` with the Euclidean norm.

use serde::Serialize;

use crate::density::GridFunction;
use crate::error::{arg, Result};
use crate::estimators::DiscreteMeasure;

mod dyadic;
mod moser;
mod oned;
mod sandwich;
mod separated;
mod simplex;
mod sinkhorn;

pub use dyadic::{dyadic_bound, dyadic_grid_bound, dyadic_upper_bound, level_discrepancy};
pub use moser::{moser_upper_bound, moser_vector_field_norm};
pub use oned::wp_1d;
pub use sandwich::{sandwich_report, SandwichRecord};
pub use separated::separated_lower_bound;
pub use simplex::{exact_wp, exact_wp_with_cap, ExactSolution, DEFAULT_CAP};
pub use sinkhorn::{sinkhorn_wp, SinkhornResult, MAX_ITERATIONS};

/// Either side of a transport problem.
#[derive(Clone, Copy, Debug)]
pub enum MeasureRef<'a> {
    Atoms(&'a DiscreteMeasure),
    /// A piecewise-constant density; its mass is spread uniformly in each cell.
    Grid(&'a GridFunction),
}

impl MeasureRef<'_> {
    pub fn d(&self) -> usize {
        match self {
            MeasureRef::Atoms(m) => m.d(),
            MeasureRef::Grid(g) => g.d,
        }
    }
}

/// A coupling stored as its nonzero entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, mass)` triplets, sorted by row then column.
    pub entries: Vec<(usize, usize, f64)>,
    /// `sum pi_ij ||x_i - y_j||^p`.
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.rows];
        for &(i, _, m) in &self.entries {
            r[i] += m;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.cols];
        for &(_, j, m) in &self.entries {
            c[j] += m;
        }
        c
    }

    /// Largest absolute marginal error against `a` and `b`.
    pub fn marginal_error(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.row_sums().iter().zip(a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let c = self.col_sums().iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        r.max(c)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.cols]; self.rows];
        for &(i, j, v) in &self.entries {
            m[i][j] += v;
        }
        m
    }
}

/// Bracket on `W_p` from two methods.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WpBoundCertificate {
    pub lower: f64,
    pub upper: f64,
    pub lower_method: String,
    pub upper_method: String,
}

impl WpBoundCertificate {
    pub fn new(lower: f64, lower_method: &str, upper: f64, upper_method: &str) -> Result<Self> {
        if lower > upper {
            return Err(crate::Error::Certificate(format!(
                "{lower_method} lower bound {lower} exceeds {upper_method} upper bound {upper}"
            )));
        }
        Ok(WpBoundCertificate {
            lower,
            upper,
            lower_method: lower_method.into(),
            upper_method: upper_method.into(),
        })
    }
}

#[inline]
pub(crate) fn cost(x: &[f64], y: &[f64], p: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if p == 2.0 {
        d2
    } else if p == 1.0 {
        d2.sqrt()
    } else {
        d2.sqrt().powf(p)
    }
}

pub(crate) fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return arg(format!("p = {p} not in [1, inf)"));
    }
    if mu.d() != nu.d() {
        return arg(format!("measures live in dimensions {} and {}", mu.d(), nu.d()));
    }
    let (a, b): (f64, f64) = (mu.weights.iter().sum(), nu.weights.iter().sum());
    if (a - b).abs() > 1e-9 {
        return arg(format!("unbalanced masses {a} and {b}"));
    }
    Ok(())
}

/// Atoms with positive weight, with their original indices.
pub(crate) fn support(m: &DiscreteMeasure) -> (Vec<usize>, Vec<f64>) {
    m.weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (i, w))
        .unzip()
}
