//! Upper bound on `W_p` from matching mass inside ever larger dyadic cubes.
//!
//! Write `e_j = (1/2) sum_{Q in Q_j} |mu(Q) - nu(Q)|`. Matching all common
//! mass inside level-`J` cubes, then the leftover inside level-`J-1` cubes
//! and so on up to the unit cube moves at most `e_j - e_{j-1}` mass a
//! distance `sqrt(d) 2^{-(j-1)}`, which telescopes to
//!
//! ```text
//! W_p^p <= d^{p/2} [ 2^{-Jp} + (2^p - 1) sum_{j=1}^{J} 2^{-jp} e_j ].
//! ```

use super::MeasureRef;
use crate::density::GridFunction;
use crate::error::{arg, Error, Result};
use crate::estimators::DiscreteMeasure;
use crate::haar::{axis_cell, mass_pyramid};

/// Finest level for which level-`j` cell keys fit in a `u64`.
fn max_level(d: usize) -> u32 {
    (63 / d) as u32
}

/// A measure prepared for repeated cell-mass queries.
enum Prepared {
    /// Per-atom axis cells at the finest level, and weights.
    Atoms { top: u32, cells: Vec<Vec<u32>>, weights: Vec<f64> },
    /// Cell masses at every level up to the grid resolution.
    Grid { d: usize, level: u32, pyramid: Vec<Vec<f64>>, values: Vec<f64> },
}

impl Prepared {
    fn new(m: MeasureRef<'_>, top: u32) -> Result<Self> {
        Ok(match m {
            MeasureRef::Atoms(mu) => {
                let cells = mu
                    .points
                    .iter()
                    .map(|x| {
                        x.iter()
                            .map(|&v| axis_cell(v, top).ok_or_else(|| Error::Domain(format!("atom coordinate {v} outside [0,1]"))))
                            .collect::<Result<Vec<u32>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Prepared::Atoms { top, cells, weights: mu.weights.clone() }
            }
            MeasureRef::Grid(g) => Prepared::Grid {
                d: g.d,
                level: g.level,
                pyramid: mass_pyramid(g.d, g.level, g.masses()),
                values: g.values.clone(),
            },
        })
    }

    /// Sorted `(cell key, mass)` for atoms at level `j`.
    fn atom_masses(&self, j: u32) -> Vec<(u64, f64)> {
        let Prepared::Atoms { top, cells, weights, .. } = self else { unreachable!() };
        let shift = top - j;
        let mut v: Vec<(u64, f64)> = cells
            .iter()
            .zip(weights)
            .map(|(c, &w)| (c.iter().fold(0u64, |acc, &k| (acc << j) | (k >> shift) as u64), w))
            .collect();
        v.sort_by_key(|e| e.0);
        let mut out: Vec<(u64, f64)> = Vec::with_capacity(v.len());
        for (k, w) in v {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += w,
                _ => out.push((k, w)),
            }
        }
        out
    }

    /// Mass of one level-`j` cell of a grid.
    fn grid_mass(&self, j: u32, key: u64) -> f64 {
        let Prepared::Grid { d, level, pyramid, values } = self else { unreachable!() };
        if j <= *level {
            return pyramid[j as usize][key as usize];
        }
        let shift = j - level;
        let mask = (1u64 << j) - 1;
        let mut coarse = 0usize;
        for i in 0..*d {
            let k = (key >> ((d - 1 - i) as u32 * j)) & mask;
            coarse = (coarse << level) | (k >> shift) as usize;
        }
        values[coarse] * (-((*d as u32 * j) as f64)).exp2()
    }
}

fn discrepancy(a: &Prepared, b: &Prepared, j: u32) -> f64 {
    match (a, b) {
        (Prepared::Atoms { .. }, Prepared::Atoms { .. }) => {
            let (x, y) = (a.atom_masses(j), b.atom_masses(j));
            let (mut i, mut k, mut s) = (0, 0, 0.0);
            while i < x.len() || k < y.len() {
                if k == y.len() || (i < x.len() && x[i].0 < y[k].0) {
                    s += x[i].1;
                    i += 1;
                } else if i == x.len() || y[k].0 < x[i].0 {
                    s += y[k].1;
                    k += 1;
                } else {
                    s += (x[i].1 - y[k].1).abs();
                    i += 1;
                    k += 1;
                }
            }
            s
        }
        (Prepared::Atoms { .. }, Prepared::Grid { pyramid, .. }) => {
            let total = pyramid[0][0];
            let mut covered = 0.0;
            let mut s = 0.0;
            for (key, w) in a.atom_masses(j) {
                let g = b.grid_mass(j, key);
                covered += g;
                s += (w - g).abs();
            }
            s + (total - covered).max(0.0)
        }
        (Prepared::Grid { .. }, Prepared::Atoms { .. }) => discrepancy(b, a, j),
        (Prepared::Grid { d, level: la, .. }, Prepared::Grid { level: lb, .. }) => {
            // both piecewise constant: finer levels split every cell proportionally
            let j = j.min(*la.max(lb));
            (0..1u64 << (*d as u32 * j)).map(|k| (a.grid_mass(j, k) - b.grid_mass(j, k)).abs()).sum()
        }
    }
}

fn grid_level(m: &MeasureRef<'_>) -> Option<u32> {
    match m {
        MeasureRef::Grid(g) => Some(g.level),
        MeasureRef::Atoms(_) => None,
    }
}

/// `sum_{Q in Q_j} |a(Q) - b(Q)|`.
pub fn level_discrepancy(a: MeasureRef<'_>, b: MeasureRef<'_>, j: u32) -> Result<f64> {
    if a.d() != b.d() {
        return arg("measures differ in dimension");
    }
    if j > max_level(a.d()) {
        return arg(format!("level {j} too fine for d = {}", a.d()));
    }
    Ok(discrepancy(&Prepared::new(a, j)?, &Prepared::new(b, j)?, j))
}

/// The hierarchical-matching bound on `W_p` for any pair of measures on
/// `[0,1]^d`. With `j_max = None` both sides must be grids and every level is
/// summed (exactly, since the discrepancy is constant beyond the finer grid).
pub fn dyadic_bound(a: MeasureRef<'_>, b: MeasureRef<'_>, p: f64, j_max: Option<u32>) -> Result<f64> {
    let d = a.d();
    if d != b.d() {
        return arg("measures differ in dimension");
    }
    if !(p >= 1.0 && p.is_finite()) {
        return arg(format!("p = {p} not in [1, inf)"));
    }
    let (top, infinite) = match (j_max, grid_level(&a), grid_level(&b)) {
        (Some(j), ..) => (j, false),
        (None, Some(x), Some(y)) => (x.max(y), true),
        (None, ..) => return arg("an atomic measure needs a finite J_max"),
    };
    if top > max_level(d) {
        return arg(format!("J_max = {top} too fine for d = {d} (limit {})", max_level(d)));
    }
    let pa = Prepared::new(a, top)?;
    let pb = Prepared::new(b, top)?;
    let factor = p.exp2() - 1.0;
    let mut sum = 0.0;
    let mut e_top = 0.0;
    for j in 1..=top {
        e_top = 0.5 * discrepancy(&pa, &pb, j);
        sum += (-(j as f64) * p).exp2() * e_top;
    }
    let tail = if infinite {
        // levels beyond `top` repeat e_top: (2^p - 1) sum_{j>top} 2^{-jp} = 2^{-top p}
        (-(top as f64) * p).exp2() * e_top
    } else {
        (-(top as f64) * p).exp2()
    };
    let wpp = (d as f64).powf(p / 2.0) * (tail + factor * sum);
    Ok(wpp.powf(1.0 / p))
}

/// [`dyadic_bound`] for two discrete measures.
pub fn dyadic_upper_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, j_max: u32) -> Result<f64> {
    dyadic_bound(MeasureRef::Atoms(mu), MeasureRef::Atoms(nu), p, Some(j_max))
}

/// Convenience for grid pairs at all levels.
pub fn dyadic_grid_bound(f: &GridFunction, g: &GridFunction, p: f64) -> Result<f64> {
    dyadic_bound(MeasureRef::Grid(f), MeasureRef::Grid(g), p, None)
}
