//! Empirical, histogram and lower-bounded density estimators.

use serde::{Deserialize, Serialize};

use crate::besov::{lp_norm, BesovParams};
use crate::density::{sample, GridDensity, GridFunction};
use crate::error::{arg, Error, Result};
use crate::haar::{analyze_grid, analyze_samples, axis_cell, linear_index, synthesize, WaveletCoeffs};
use crate::transport::{self, MeasureRef};

/// Weighted atoms in `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return arg("a measure needs at least one atom");
        }
        if points.len() != weights.len() {
            return arg(format!("{} points but {} weights", points.len(), weights.len()));
        }
        let d = points[0].len();
        if d == 0 {
            return arg("atoms must have at least one coordinate");
        }
        if points.iter().any(|x| x.len() != d) {
            return arg("atoms have inconsistent dimension");
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return arg("atom coordinates must be finite");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return arg("weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return arg(format!("weights sum to {total}, not 1"));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return arg("weights have no positive mass");
        }
        Self::new(points, weights.iter().map(|w| w / total).collect())
    }

    /// Cell-center atoms carrying the cell masses; empty cells are dropped.
    pub fn from_grid(g: &GridFunction) -> Result<Self> {
        let masses = g.masses();
        let (points, weights): (Vec<_>, Vec<_>) = masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(c, &m)| (g.cell_center(c), m))
            .unzip();
        Self::normalized(points, weights)
    }

    pub fn d(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn in_unit_cube(&self) -> bool {
        self.points.iter().flatten().all(|x| (0.0..=1.0).contains(x))
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            points: Vec<Vec<f64>>,
            weights: Vec<f64>,
        }
        let raw = Raw::deserialize(de)?;
        DiscreteMeasure::new(raw.points, raw.weights).map_err(serde::de::Error::custom)
    }
}

pub fn empirical(samples: &[Vec<f64>]) -> Result<DiscreteMeasure> {
    if samples.is_empty() {
        return arg("empty sample");
    }
    DiscreteMeasure::uniform(samples.to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Densities bounded below by `m > 0`.
    BoundedThm1,
    /// No lower bound.
    UnboundedThm5,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRule {
    pub regime: Regime,
    pub d: usize,
    pub s: f64,
    pub p: f64,
    pub n: usize,
}

/// Resolution `J` with `2^J ~ n^{1/k}`, rounding half down and clamped to `2^{dJ} <= n`.
pub fn select_level(rule: &LevelRule) -> u32 {
    let d = rule.d as f64;
    let k = match rule.regime {
        Regime::BoundedThm1 if rule.d >= 3 => d + 2.0 * rule.s,
        Regime::BoundedThm1 => 2.0 + 2.0 * rule.s,
        Regime::UnboundedThm5 if d > 2.0 * rule.p => d + 2.0 * rule.s,
        Regime::UnboundedThm5 => 2.0 * rule.p + 2.0 * rule.s,
    };
    let log_n = (rule.n.max(1) as f64).log2();
    let j = ((log_n / k) - 0.5).ceil().max(0.0);
    let cap = (log_n / d + 1e-12).floor().max(0.0);
    j.min(cap) as u32
}

/// Whether `2^{dJ} > n`, where the histogram is undersampled.
pub fn undersampled(n: usize, d: usize, level: u32) -> bool {
    (d as u32 * level) >= usize::BITS || (1usize << (d as u32 * level)) > n
}

/// Cell counts at level `J`, scaled to a density.
pub fn histogram_estimator(samples: &[Vec<f64>], level: u32) -> Result<GridDensity> {
    let Some(first) = samples.first() else {
        return arg("empty sample");
    };
    let d = first.len();
    let mut counts = GridFunction::new(d, level, vec![0.0; 1usize << (d as u32 * level)])?;
    let mut cell = vec![0u32; d];
    for x in samples {
        if x.len() != d {
            return arg("samples have inconsistent dimension");
        }
        for (c, &v) in cell.iter_mut().zip(x) {
            *c = axis_cell(v, level)
                .ok_or_else(|| Error::Domain(format!("sample coordinate {v} outside [0,1]")))?;
        }
        counts.values[linear_index(&cell, level)] += 1.0;
    }
    let scale = counts.cells() as f64 / samples.len() as f64;
    for v in &mut counts.values {
        *v *= scale;
    }
    GridDensity::from_function(counts)
}

/// Result of projecting the raw estimate onto densities bounded below by `m`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundedEstimate {
    pub density: GridDensity,
    /// `||density - raw||` in `B^{-1}_{p,1}`.
    pub objective: f64,
    /// Same distance for the clip-and-renormalise point.
    pub fallback_objective: f64,
    /// Certified lower bound on the minimum over `D(m)`.
    pub lower_bound: f64,
    /// `objective <= 2 * lower_bound` (or the raw estimate was already feasible).
    pub certified: bool,
    pub iterations: usize,
}

pub const PROJECTION_ITERATIONS: usize = 500;

/// Euclidean projection onto `{x >= m, mean(x) = 1}`: `x = max(v - tau, m)`.
pub fn project_floor_mean(v: &[f64], m: f64) -> Vec<f64> {
    let n = v.len();
    let target = n as f64;
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // with the top k entries free, tau = (sum_top_k - (target - (n-k) m)) / k
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for k in 1..=n {
        prefix += sorted[k - 1];
        let t = (prefix - (target - (n - k) as f64 * m)) / k as f64;
        let next_clipped = k == n || sorted[k] - t <= m;
        if sorted[k - 1] - t > m && next_clipped {
            tau = t;
            break;
        }
        tau = t;
    }
    v.iter().map(|x| (x - tau).max(m)).collect()
}

fn clip_and_renormalize(f: &[f64], m: f64) -> Vec<f64> {
    let excess: Vec<f64> = f.iter().map(|&v| v.max(m) - m).collect();
    let mean = excess.iter().sum::<f64>() / f.len() as f64;
    excess.iter().map(|e| m + (1.0 - m) * e / mean).collect()
}

/// Objective `||A (x - raw)||` and a subgradient `y` in coefficient space (dual ball).
fn objective_and_dual(x: &GridFunction, raw: &WaveletCoeffs, bp: &BesovParams) -> (f64, WaveletCoeffs) {
    let c = analyze_grid(x, raw.levels).expect("same resolution");
    let diff = c.sub(raw).expect("same shape");
    let mut y = WaveletCoeffs::zeros(diff.d, diff.levels);
    let mut obj = 0.0;
    let p = bp.p;
    for (j, (b, yj)) in diff.betas.iter().zip(y.betas.iter_mut()).enumerate() {
        let w = bp.level_weight(diff.d, j as u32);
        let norm = lp_norm(b, p);
        obj += w * norm;
        if norm > 0.0 {
            for (g, &v) in yj.iter_mut().zip(b) {
                *g = w * v.signum() * (v.abs() / norm).powf(p - 1.0);
            }
        }
    }
    (obj, y)
}

/// Per-cell linear functional `A^T y` (without the cell volume).
fn adjoint(y: &WaveletCoeffs, level: u32) -> Vec<f64> {
    synthesize(y, level).expect("valid tree").values
}

fn inner(a: &WaveletCoeffs, b: &WaveletCoeffs) -> f64 {
    a.betas
        .iter()
        .flatten()
        .zip(b.betas.iter().flatten())
        .map(|(x, y)| x * y)
        .sum()
}

/// `min_{h in D(m)} <A^T y, h> - <y, A raw>`.
fn dual_bound(y: &WaveletCoeffs, raw: &WaveletCoeffs, level: u32, m: f64) -> f64 {
    let s = adjoint(y, level);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    m * mean + (1.0 - m) * min - inner(y, raw)
}

/// Projects a raw grid estimate onto `D(m)` in the `B^{-1}_{p,1}` norm by
/// projected subgradient descent with a certified dual lower bound.
pub fn project_to_floor(raw: &GridDensity, m: f64, p: f64) -> Result<BoundedEstimate> {
    if !(m > 0.0) {
        return arg(format!("lower bound m = {m} must be positive"));
    }
    if m >= 1.0 {
        return arg(format!("m = {m} >= 1 leaves only the uniform density"));
    }
    let bp = BesovParams::dual_one(p);
    if raw.min() >= m {
        return Ok(BoundedEstimate {
            density: raw.clone(),
            objective: 0.0,
            fallback_objective: 0.0,
            lower_bound: 0.0,
            certified: true,
            iterations: 0,
        });
    }
    let level = raw.level();
    let raw_c = analyze_grid(raw.function(), level)?;
    let mut x = raw.function().clone();
    x.values = clip_and_renormalize(raw.values(), m);
    let (fallback, _) = objective_and_dual(&x, &raw_c, &bp);
    let scale = fallback;

    let mut best = (fallback, x.values.clone());
    let mut lower: f64 = 0.0;
    let mut y_sum = WaveletCoeffs::zeros(raw_c.d, raw_c.levels);
    let vol = x.cell_volume();
    let mut iterations = 0;
    for t in 1..=PROJECTION_ITERATIONS {
        iterations = t;
        let (obj, y) = objective_and_dual(&x, &raw_c, &bp);
        if obj < best.0 {
            best = (obj, x.values.clone());
        }
        lower = lower.max(dual_bound(&y, &raw_c, level, m));
        for (a, b) in y_sum.betas.iter_mut().flatten().zip(y.betas.iter().flatten()) {
            *a += b;
        }
        if best.0 <= 2.0 * lower || obj == 0.0 {
            break;
        }
        let g: Vec<f64> = adjoint(&y, level).iter().map(|v| v * vol).collect();
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2 == 0.0 {
            break;
        }
        // step c / sqrt(t) along g / |g|^2: the first step is a Polyak step
        let step = scale / (t as f64).sqrt() / gn2;
        let moved: Vec<f64> = x.values.iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
        x.values = project_floor_mean(&moved, m);
    }
    let y_avg = y_sum.scale(1.0 / iterations as f64);
    lower = lower.max(dual_bound(&y_avg, &raw_c, level, m));

    let mut values = best.1;
    // exact mean 1 and floor m after rounding
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in &mut values {
        *v = m + (*v - m).max(0.0) * (1.0 - m) / (mean - m);
    }
    let density = GridDensity::new(raw.d(), level, values)?;
    let (objective, _) = objective_and_dual(density.function(), &raw_c, &bp);
    Ok(BoundedEstimate {
        density,
        objective,
        fallback_objective: fallback,
        lower_bound: lower,
        certified: objective <= 2.0 * lower + 1e-15,
        iterations,
    })
}

/// Histogram at level `J`, projected onto densities bounded below by `m`.
pub fn bounded_estimator(samples: &[Vec<f64>], level: u32, m: f64, p: f64) -> Result<BoundedEstimate> {
    if m >= 1.0 {
        return arg(format!("m = {m} >= 1 leaves only the uniform density"));
    }
    project_to_floor(&histogram_estimator(samples, level)?, m, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OracleMethod {
    ExactGrid,
    Sinkhorn { eps: f64 },
    /// `j_max = None` sums every level when both sides are grids.
    DyadicUb { j_max: Option<u32> },
}

/// An estimate to compare against the truth.
#[derive(Clone, Copy, Debug)]
pub enum Estimate<'a> {
    Grid(&'a GridDensity),
    Atoms(&'a DiscreteMeasure),
}

/// `W_p` between an estimate and a grid density.
///
/// Exact and Sinkhorn evaluation discretise grids at their cell centres (a
/// grid estimate is refined to the finer of the two resolutions). The dyadic
/// bound works with the exact cell masses of both measures.
pub fn oracle_distance_to_truth(est: Estimate<'_>, truth: &GridDensity, p: f64, method: OracleMethod) -> Result<f64> {
    let d = match est {
        Estimate::Grid(g) => g.d(),
        Estimate::Atoms(a) => a.d(),
    };
    if d != truth.d() {
        return arg("estimate and truth differ in dimension");
    }
    match method {
        OracleMethod::DyadicUb { j_max } => {
            let a = match est {
                Estimate::Grid(g) => MeasureRef::Grid(g.function()),
                Estimate::Atoms(m) => MeasureRef::Atoms(m),
            };
            transport::dyadic_bound(a, MeasureRef::Grid(truth.function()), p, j_max)
        }
        OracleMethod::ExactGrid | OracleMethod::Sinkhorn { .. } => {
            let (mu, nu) = match est {
                Estimate::Grid(g) => {
                    let r = g.level().max(truth.level());
                    (
                        DiscreteMeasure::from_grid(&g.function().refine(r)?)?,
                        DiscreteMeasure::from_grid(&truth.function().refine(r)?)?,
                    )
                }
                Estimate::Atoms(a) => (a.clone(), DiscreteMeasure::from_grid(truth.function())?),
            };
            match method {
                OracleMethod::ExactGrid => Ok(transport::exact_wp(&mu, &nu, p)?.0),
                OracleMethod::Sinkhorn { eps } => {
                    Ok(transport::sinkhorn_wp(&mu, &nu, p, eps)?.value.max(0.0).powf(1.0 / p))
                }
                OracleMethod::DyadicUb { .. } => unreachable!(),
            }
        }
    }
}

/// Monte Carlo `E ||beta_j - beta_hat_j||_1` for uniform truth (where `beta_j = 0`),
/// one entry per level `0..levels`.
pub fn coefficient_deviation(d: usize, n: usize, levels: u32, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if reps == 0 {
        return arg("need at least one replication");
    }
    let truth = GridDensity::uniform(d, levels);
    let mut acc = vec![0.0; levels as usize];
    for r in 0..reps {
        let xs = sample(&truth, n, seed + r as u64);
        let c = analyze_samples(&xs, levels)?;
        for (a, b) in acc.iter_mut().zip(&c.betas) {
            *a += lp_norm(b, 1.0);
        }
    }
    Ok(acc.into_iter().map(|a| a / reps as f64).collect())
}
