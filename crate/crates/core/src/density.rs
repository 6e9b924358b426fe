//! Piecewise-constant densities on the dyadic grid, test-density families,
//! and exact sampling.
//!
//! Grid cells are ordered row-major with the last coordinate fastest, the
//! same order as [`crate::haar::CubeId::linear`]. The JSON form of a grid is
//! `{"d": .., "R": .., "values": [..]}`.

use serde::{Deserialize, Serialize};

use crate::besov::{ball_membership, BesovParams};
use crate::error::{arg, Error, Result};
use crate::haar::{self, analyze_grid, multi_index, HaarIndex, WaveletCoeffs};
use crate::quad::{gauss_legendre, integrate};
use crate::resample::AliasTable;
use crate::rng;

/// Tolerance on the unit-mass invariant of [`GridDensity`].
pub const MASS_TOL: f64 = 1e-10;

/// A function constant on each cell of the level-`R` dyadic grid. May be negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub d: usize,
    #[serde(rename = "R")]
    pub level: u32,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(d: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        if d == 0 || d > haar::MAX_DIM {
            return arg(format!("dimension {d} not in 1..={}", haar::MAX_DIM));
        }
        if d as u32 * level >= usize::BITS - 1 {
            return arg(format!("grid 2^({d}*{level}) is too large"));
        }
        let expected = 1usize << (d as u32 * level);
        if values.len() != expected {
            return arg(format!(
                "grid at d={d}, R={level} needs {expected} values, got {}",
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return arg("grid values must be finite");
        }
        Ok(GridFunction { d, level, values })
    }

    pub fn constant(d: usize, level: u32, value: f64) -> Self {
        GridFunction {
            d,
            level,
            values: vec![value; 1usize << (d as u32 * level)],
        }
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn cell_volume(&self) -> f64 {
        (-((self.d as u32 * self.level) as f64)).exp2()
    }

    pub fn cell_index(&self, linear: usize) -> Vec<u32> {
        multi_index(linear, self.d, self.level)
    }

    pub fn cell_center(&self, linear: usize) -> Vec<f64> {
        let h = self.side();
        self.cell_index(linear)
            .into_iter()
            .map(|k| (k as f64 + 0.5) * h)
            .collect()
    }

    pub fn value_at(&self, point: &[f64]) -> Result<f64> {
        let cube = haar::cube_of(point, self.level)?;
        Ok(self.values[cube.linear()])
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.cells() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn masses(&self) -> Vec<f64> {
        let v = self.cell_volume();
        self.values.iter().map(|x| x * v).collect()
    }

    /// The same function tabulated on a finer grid.
    pub fn refine(&self, level: u32) -> Result<GridFunction> {
        if level < self.level {
            return arg(format!("cannot refine level {} to {level}", self.level));
        }
        if level == self.level {
            return Ok(self.clone());
        }
        let shift = level - self.level;
        let n = 1usize << (self.d as u32 * level);
        let values = (0..n)
            .map(|lin| {
                let coarse = multi_index(lin, self.d, level)
                    .into_iter()
                    .fold(0usize, |acc, k| (acc << self.level) | (k >> shift) as usize);
                self.values[coarse]
            })
            .collect();
        GridFunction::new(self.d, level, values)
    }

    /// Cell averages on a coarser grid.
    pub fn coarsen(&self, level: u32) -> Result<GridFunction> {
        if level > self.level {
            return arg(format!("cannot coarsen level {} to {level}", self.level));
        }
        let pyramid = crate::haar::mass_pyramid(self.d, self.level, self.masses());
        let scale = (1usize << (self.d as u32 * level)) as f64;
        let values = pyramid[level as usize].iter().map(|m| m * scale).collect();
        GridFunction::new(self.d, level, values)
    }

    /// `int |self - other|` at the finer of the two resolutions.
    pub fn l1_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.d != other.d {
            return arg("grids differ in dimension");
        }
        let level = self.level.max(other.level);
        let a = self.refine(level)?;
        let b = other.refine(level)?;
        Ok(a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            * a.cell_volume())
    }
}

/// A nonnegative grid function integrating to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GridDensity(GridFunction);

impl GridDensity {
    pub fn new(d: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        Self::from_function(GridFunction::new(d, level, values)?)
    }

    pub fn from_function(f: GridFunction) -> Result<Self> {
        if let Some(v) = f.values.iter().find(|&&v| v < 0.0) {
            return arg(format!("density has negative value {v}"));
        }
        let mean = f.mean();
        if (mean - 1.0).abs() > MASS_TOL {
            return arg(format!("density integrates to {mean}, not 1"));
        }
        Ok(GridDensity(f))
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(d: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        let f = GridFunction::new(d, level, values)?;
        let mean = f.mean();
        if mean.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return arg("cannot normalise a grid with no positive mass");
        }
        Self::from_function(GridFunction {
            values: f.values.iter().map(|v| v / mean).collect(),
            ..f
        })
    }

    pub fn uniform(d: usize, level: u32) -> Self {
        GridDensity(GridFunction::constant(d, level, 1.0))
    }

    pub fn function(&self) -> &GridFunction {
        &self.0
    }

    pub fn into_function(self) -> GridFunction {
        self.0
    }

    pub fn d(&self) -> usize {
        self.0.d
    }

    pub fn level(&self) -> u32 {
        self.0.level
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    pub fn refine(&self, level: u32) -> Result<GridDensity> {
        Ok(GridDensity(self.0.refine(level)?))
    }

    pub fn coefficients(&self) -> WaveletCoeffs {
        analyze_grid(&self.0, self.0.level).expect("own resolution is always valid")
    }

    /// `(1+t)/2 * self + (1-t)/2 * other` style mixtures: `a * self + b * other`, `a + b = 1`.
    pub fn mix(&self, a: f64, other: &GridDensity, b: f64) -> Result<GridDensity> {
        if self.d() != other.d() {
            return arg("cannot mix densities of different dimension");
        }
        let level = self.level().max(other.level());
        let x = self.0.refine(level)?;
        let y = other.0.refine(level)?;
        GridDensity::new(
            x.d,
            level,
            x.values
                .iter()
                .zip(&y.values)
                .map(|(u, v)| (a * u + b * v).max(0.0))
                .collect(),
        )
    }
}

impl std::ops::Deref for GridDensity {
    type Target = GridFunction;
    fn deref(&self) -> &GridFunction {
        &self.0
    }
}

impl<'de> Deserialize<'de> for GridDensity {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let f = GridFunction::deserialize(de)?;
        GridFunction::new(f.d, f.level, f.values)
            .and_then(GridDensity::from_function)
            .map_err(serde::de::Error::custom)
    }
}

/// The standard mollifier `exp(-1/(t(1-t)))` on `(0,1)`.
fn mollifier(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

/// Cell integrals of `x -> mollifier((x - offset) / width)` over the `2^level`
/// cells of `[0,1]`.
fn bump_cell_integrals(level: u32, offset: f64, width: f64) -> Vec<f64> {
    let rule = gauss_legendre(16);
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    (0..n)
        .map(|k| {
            let a = (k as f64 * h).max(offset);
            let b = ((k + 1) as f64 * h).min(offset + width);
            integrate(|x| mollifier((x - offset) / width), a, b, &rule)
        })
        .collect()
}

/// Tensor product of per-axis cell profiles, as a grid function.
fn tensor_grid(d: usize, level: u32, profile: &[f64]) -> GridFunction {
    let n = 1usize << (d as u32 * level);
    let values = (0..n)
        .map(|lin| {
            multi_index(lin, d, level)
                .into_iter()
                .map(|k| profile[k as usize])
                .product()
        })
        .collect();
    GridFunction { d, level, values }
}

/// Smooth bump supported in `(0, 1/3)^d`: the cell averages of a product of
/// rescaled mollifiers, normalised to unit mass.
pub fn bump(d: usize, level: u32) -> Result<GridDensity> {
    if level < 3 {
        return arg("bump needs resolution R >= 3 to resolve (0, 1/3)");
    }
    let integrals = bump_cell_integrals(level, 0.0, 1.0 / 3.0);
    let total: f64 = integrals.iter().sum();
    let n = (1usize << level) as f64;
    let profile: Vec<f64> = integrals.iter().map(|v| v / total * n).collect();
    GridDensity::from_function(tensor_grid(d, level, &profile))
}

/// Mirror image `x -> 1 - x` in every coordinate. For the symmetric bump this
/// is its translate onto `(2/3, 1)^d`.
fn reflect(g: &GridDensity) -> GridDensity {
    let f = g.function();
    let n = f.cells();
    // reflecting every axis reverses the row-major order
    let values = (0..n).map(|lin| f.values[n - 1 - lin]).collect();
    GridDensity(GridFunction { values, ..f.clone() })
}

/// `(f_lambda, f_{-lambda})` with `f_lambda = ((1 + lambda) g0 + (1 - lambda) g1) / 2`,
/// `g0` the bump on `(0,1/3)^d` and `g1` its translate onto `(2/3,1)^d`.
pub fn two_bump_pair(lambda: f64, d: usize, level: u32) -> Result<(GridDensity, GridDensity)> {
    if !(-1.0..=1.0).contains(&lambda) {
        return arg(format!("lambda = {lambda} outside [-1, 1]"));
    }
    let g0 = bump(d, level)?;
    let g1 = reflect(&g0);
    let plus = g0.mix((1.0 + lambda) / 2.0, &g1, (1.0 - lambda) / 2.0)?;
    let minus = g0.mix((1.0 - lambda) / 2.0, &g1, (1.0 + lambda) / 2.0)?;
    Ok((plus, minus))
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Box {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    /// Euclidean distance between two boxes (0 if they touch or overlap).
    pub fn gap(&self, other: &Box) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((&a0, &a1), (&b0, &b1))| {
                let g = (b0 - a1).max(a0 - b1).max(0.0);
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest union of level-`level` grid cells covering the box.
    pub fn snap_out(&self, level: u32) -> Box {
        let n = (1u64 << level) as f64;
        Box {
            lo: self.lo.iter().map(|&a| (a * n).floor() / n).collect(),
            hi: self.hi.iter().map(|&b| (b * n).ceil() / n).collect(),
        }
    }
}

/// Minimum pairwise gap between two box collections.
pub fn box_set_gap(s: &[Box], t: &[Box]) -> f64 {
    s.iter()
        .flat_map(|a| t.iter().map(move |b| a.gap(b)))
        .fold(f64::INFINITY, f64::min)
}

/// One member of the lower-bound family built from translated small bumps.
#[derive(Clone, Debug)]
pub struct AssouadMember {
    pub density: GridDensity,
    /// Grid-snapped support box of the bump at each active placement, one per pair.
    pub active: Vec<Box>,
    /// Grid-snapped support boxes of every placement in the lattice, pairs adjacent.
    pub placements: Vec<Box>,
    /// Grid-snapped support of the anchor bump `kappa g0`.
    pub anchor: Box,
    /// `int h`, measured on the grid.
    pub bump_mass: f64,
    pub kappa: f64,
}

/// Lattice corners of the placements: spacing `3/M` inside `[1/3, 1]^d`.
fn assouad_lattice(m_scale: u32, d: usize) -> Vec<Vec<f64>> {
    let m = m_scale as f64;
    let spacing = 3.0 / m;
    let width = 1.0 / (3.0 * m);
    let mut per_axis = Vec::new();
    let mut k = 0;
    loop {
        let x = 1.0 / 3.0 + spacing * (k as f64 + 0.5) - width / 2.0;
        if x + width > 1.0 {
            break;
        }
        per_axis.push(x);
        k += 1;
    }
    let count = per_axis.len().pow(d as u32);
    (0..count)
        .map(|mut c| {
            let mut p = vec![0.0; d];
            for i in (0..d).rev() {
                p[i] = per_axis[c % per_axis.len()];
                c /= per_axis.len();
            }
            p
        })
        .collect()
}

/// `f_eps = sum_i h(x - gamma_i^{eps_i}) + kappa g0` with `h(x) = c M^{-s} g0(M x)`.
///
/// Placements form a regular lattice of spacing `3/M` in `[1/3,1]^d`,
/// consecutive lattice points are paired, and `eps_i = +1` selects the first
/// point of pair `i`. The anchor `g0` occupies `(0,1/3)^d`.
pub fn assouad_family(
    eps: &[i8],
    m_scale: u32,
    s: f64,
    c: f64,
    d: usize,
    level: u32,
) -> Result<AssouadMember> {
    if m_scale == 0 {
        return arg("M_scale must be positive");
    }
    if c <= 0.0 {
        return arg("bump constant c must be positive");
    }
    let width = 1.0 / (3.0 * m_scale as f64);
    // at least four cells across each small bump
    if (1u64 << level) as f64 * width < 4.0 || level < 3 {
        return arg(format!(
            "resolution R={level} does not resolve bumps of width 1/(3M) with M={m_scale}"
        ));
    }
    let lattice = assouad_lattice(m_scale, d);
    let pairs = lattice.len() / 2;
    if pairs == 0 {
        return arg(format!("no placement pair fits for M={m_scale}, d={d}"));
    }
    if eps.len() != pairs {
        return arg(format!("sign vector has {} entries, {pairs} pairs available", eps.len()));
    }
    if eps.iter().any(|&e| e != 1 && e != -1) {
        return arg("sign vector entries must be +1 or -1");
    }

    let g0 = bump(d, level)?;
    let amplitude = c * (m_scale as f64).powf(-s);
    let n = (1usize << level) as f64;
    let mut total = vec![0.0; g0.cells()];
    let mut active = Vec::with_capacity(pairs);
    let mut bump_mass = 0.0;
    let placements: Vec<Box> = lattice
        .iter()
        .map(|corner| {
            Box {
                lo: corner.clone(),
                hi: corner.iter().map(|x| x + width).collect(),
            }
            .snap_out(level)
        })
        .collect();
    for (i, &e) in eps.iter().enumerate() {
        let corner = &lattice[2 * i + usize::from(e == -1)];
        // per-axis cell averages of g0_1d(M (x - corner))
        let mut grid = GridFunction::constant(d, level, 1.0);
        let mut profiles = Vec::with_capacity(d);
        for &a in corner {
            let integrals = bump_cell_integrals(level, a, width);
            profiles.push(integrals);
        }
        let z = bump_cell_integrals(level, 0.0, 1.0 / 3.0).iter().sum::<f64>();
        for (lin, v) in grid.values.iter_mut().enumerate() {
            let idx = multi_index(lin, d, level);
            // g0(Mx) = prod_i 3 mollifier(3 M x_i) / (3 z) with unit-mass normalisation of g0
            let mut prod = amplitude;
            for (axis, &k) in idx.iter().enumerate() {
                prod *= profiles[axis][k as usize] * n / (z / (1.0 / 3.0) * (1.0 / 3.0)) / 1.0;
            }
            *v = prod;
        }
        let _ = &mut grid;
        let mass = grid.integral();
        bump_mass = mass;
        for (t, v) in total.iter_mut().zip(&grid.values) {
            *t += v;
        }
        active.push(placements[2 * i + usize::from(e == -1)].clone());
    }
    let kappa = 1.0 - pairs as f64 * bump_mass;
    if kappa <= 0.0 {
        return arg(format!("bumps carry mass {} >= 1; reduce c", pairs as f64 * bump_mass));
    }
    for (t, v) in total.iter_mut().zip(g0.values()) {
        *t += kappa * v;
    }
    let density = GridDensity::normalized(d, level, total)?;
    let anchor = Box {
        lo: vec![0.0; d],
        hi: vec![1.0 / 3.0; d],
    }
    .snap_out(level);
    Ok(AssouadMember {
        density,
        active,
        placements,
        anchor,
        bump_mass,
        kappa,
    })
}

/// Number of sign pairs available to [`assouad_family`].
pub fn assouad_pairs(m_scale: u32, d: usize) -> usize {
    assouad_lattice(m_scale, d).len() / 2
}

/// `1 + a * sum_{psi in Psi_J} eps_psi psi` on the level-`R` grid (`R > J`).
pub fn perturbed_uniform(
    eps: &[i8],
    amplitude: f64,
    level_j: u32,
    d: usize,
    resolution: u32,
) -> Result<GridDensity> {
    if resolution <= level_j {
        return arg(format!(
            "resolution {resolution} cannot represent level-{level_j} wavelets"
        ));
    }
    let count = haar::level_len(d, level_j);
    if eps.len() != count {
        return arg(format!("sign vector needs {count} entries, got {}", eps.len()));
    }
    if eps.iter().any(|&e| e != 1 && e != -1) {
        return arg("sign vector entries must be +1 or -1");
    }
    let mut c = WaveletCoeffs::uniform(d, level_j + 1);
    for (b, &e) in c.betas[level_j as usize].iter_mut().zip(eps) {
        *b = amplitude * e as f64;
    }
    let f = haar::synthesize(&c, resolution)?;
    let min = f.min();
    if min <= 0.0 {
        return arg(format!(
            "amplitude {amplitude} makes the density nonpositive (min {min})"
        ));
    }
    GridDensity::from_function(f)
}

/// Coefficients of [`perturbed_uniform`] without going through the grid.
pub fn perturbed_uniform_coeffs(eps: &[i8], amplitude: f64, level_j: u32, d: usize) -> WaveletCoeffs {
    let mut c = WaveletCoeffs::uniform(d, level_j + 1);
    for (b, &e) in c.betas[level_j as usize].iter_mut().zip(eps) {
        *b = amplitude * e as f64;
    }
    c
}

/// `n` exact draws from a grid density: alias table over cell masses, then a
/// uniform point in the chosen cell. Each draw consumes `2 + d` values.
pub fn sample(g: &GridDensity, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let table = AliasTable::build(&g.masses()).expect("a density has positive mass");
    let mut stream = rng::stream(seed);
    (0..n)
        .map(|_| point_in_cell(g.function(), table.draw(&mut stream), &mut stream))
        .collect()
}

pub(crate) fn point_in_cell(f: &GridFunction, cell: usize, stream: &mut rng::Stream) -> Vec<f64> {
    let h = f.side();
    f.cell_index(cell)
        .into_iter()
        .map(|k| {
            let lo = k as f64 * h;
            let hi = lo + h;
            let x = lo + rng::unit(stream) * h;
            if x < hi {
                x
            } else {
                f64::from_bits(hi.to_bits() - 1)
            }
        })
        .collect()
}

/// Declarative description of a test density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    Uniform,
    Bump,
    /// `(1 - weight) * uniform + weight * bump`.
    BumpMixture { weight: f64 },
    TwoBump { lambda: f64 },
    Assouad {
        m_scale: u32,
        s: f64,
        #[serde(default = "default_bump_constant")]
        c: f64,
        eps: Vec<i8>,
    },
    PerturbedUniform { j: u32, amplitude: f64, eps: Vec<i8> },
}

fn default_bump_constant() -> f64 {
    1.0
}

/// Target Besov ball `B^s_{p,q}(L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    #[serde(flatten)]
    pub params: BesovParams,
    #[serde(rename = "L")]
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityFamilySpec {
    #[serde(flatten)]
    pub kind: FamilyKind,
    pub d: usize,
    #[serde(rename = "R")]
    pub resolution: u32,
    #[serde(default)]
    pub ball: Option<BallSpec>,
}

impl DensityFamilySpec {
    /// Generates the member(s); two-bump families yield the pair
    /// `(f_lambda, f_{-lambda})`. Every member is checked against `ball`.
    pub fn build(&self) -> Result<Vec<GridDensity>> {
        let (d, r) = (self.d, self.resolution);
        let members = match &self.kind {
            FamilyKind::Uniform => vec![GridDensity::uniform(d, r)],
            FamilyKind::Bump => vec![bump(d, r)?],
            FamilyKind::BumpMixture { weight } => {
                if !(0.0..=1.0).contains(weight) {
                    return arg(format!("mixture weight {weight} outside [0,1]"));
                }
                vec![GridDensity::uniform(d, r).mix(1.0 - weight, &bump(d, r)?, *weight)?]
            }
            FamilyKind::TwoBump { lambda } => {
                let (a, b) = two_bump_pair(*lambda, d, r)?;
                vec![a, b]
            }
            FamilyKind::Assouad { m_scale, s, c, eps } => {
                vec![assouad_family(eps, *m_scale, *s, *c, d, r)?.density]
            }
            FamilyKind::PerturbedUniform { j, amplitude, eps } => {
                vec![perturbed_uniform(eps, *amplitude, *j, d, r)?]
            }
        };
        if let Some(ball) = &self.ball {
            for g in &members {
                if !ball_membership(&g.coefficients(), &ball.params, ball.radius) {
                    return Err(Error::Argument(format!(
                        "generated density is outside the declared ball (norm {})",
                        crate::besov::besov_norm(&g.coefficients(), &ball.params)
                    )));
                }
            }
        }
        Ok(members)
    }
}

/// Wavelet at level `j` whose support contains `point` with the given pattern.
pub fn wavelet_at(point: &[f64], level: u32, pattern: u32) -> Result<HaarIndex> {
    let cube = haar::cube_of(point, level)?;
    HaarIndex::wavelet(level, cube.index, pattern)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_density_invariants() {
        assert!(GridDensity::new(1, 1, vec![1.5, 0.5]).is_ok());
        assert!(GridDensity::new(1, 1, vec![2.5, -0.5]).is_err());
        assert!(GridDensity::new(1, 1, vec![1.0, 0.5]).is_err());
        assert!(GridDensity::new(1, 2, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn refine_preserves_integral() {
        let g = GridDensity::new(2, 1, vec![0.5, 1.5, 1.0, 1.0]).unwrap();
        let r = g.refine(3).unwrap();
        assert!((r.integral() - 1.0).abs() < 1e-15);
        assert_eq!(r.value_at(&[0.1, 0.9]).unwrap(), 1.5);
        assert_eq!(r.coarsen(1).unwrap(), *g.function());
        let c = GridFunction::new(1, 2, vec![1.0, 3.0, 0.0, 0.0]).unwrap().coarsen(1).unwrap();
        assert_eq!(c.values, vec![2.0, 0.0]);
        assert!(g.coarsen(2).is_err());
    }

    #[test]
    fn bump_support_and_mass() {
        for d in 1..=3 {
            let r = 5;
            let g = bump(d, r).unwrap();
            assert!((g.integral() - 1.0).abs() < 1e-10);
            assert_eq!(g.min(), 0.0);
            let support = g.values().iter().filter(|&&v| v > 0.0).count();
            // (0,1/3) meets ceil(2^R / 3) cells per axis
            let per_axis = ((1u64 << r) as f64 / 3.0).ceil() as usize;
            assert_eq!(support, per_axis.pow(d as u32));
            for lin in 0..g.cells() {
                if g.values()[lin] > 0.0 {
                    let idx = g.cell_index(lin);
                    assert!(idx.iter().all(|&k| (k as f64) / (1u64 << r) as f64 <= 1.0 / 3.0));
                }
            }
        }
        assert!(bump(1, 2).is_err());
    }

    #[test]
    fn bump_symmetric_about_one_sixth() {
        // cell sums of a smooth compactly supported profile reproduce its
        // odd central moments to near machine precision
        let g = bump(1, 8).unwrap();
        let h = g.side();
        let mean: f64 = (0..g.cells())
            .map(|k| g.values()[k] * h * (k as f64 + 0.5) * h)
            .sum();
        let third: f64 = (0..g.cells())
            .map(|k| {
                let x = (k as f64 + 0.5) * h - 1.0 / 6.0;
                g.values()[k] * h * x * x * x
            })
            .sum();
        assert!((mean - 1.0 / 6.0).abs() < 1e-10, "{mean}");
        assert!(third.abs() < 1e-10, "{third}");
    }

    #[test]
    fn two_bump_examples() {
        let (a, b) = two_bump_pair(0.0, 2, 4).unwrap();
        assert_eq!(a, b);
        let g0 = bump(2, 4).unwrap();
        let (a, b) = two_bump_pair(1.0, 2, 4).unwrap();
        assert_eq!(a, g0);
        assert_eq!(b, reflect(&g0));
        let lambda = 0.3;
        let (a, _) = two_bump_pair(lambda, 2, 5).unwrap();
        let s = Box {
            lo: vec![0.0; 2],
            hi: vec![1.0 / 3.0; 2],
        };
        let mass: f64 = (0..a.cells())
            .filter(|&lin| s.contains(&a.cell_center(lin)))
            .map(|lin| a.values()[lin] * a.cell_volume())
            .sum();
        assert!((mass - (1.0 + lambda) / 2.0).abs() < 1e-12);
        assert!(two_bump_pair(1.5, 1, 4).is_err());
    }

    #[test]
    fn perturbed_uniform_examples() {
        let d = 2;
        let j = 1;
        let count = haar::level_len(d, j);
        let eps: Vec<i8> = (0..count).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let a = 0.05;
        let g = perturbed_uniform(&eps, a, j, d, 3).unwrap();
        assert_eq!(g, perturbed_uniform(&eps, a, j, d, 3).unwrap());
        let overlap = (1u32 << d) - 1;
        let bound = 1.0 - a * haar::level_scale(d, j) * overlap as f64;
        assert!(g.min() >= bound - 1e-12 && bound > 0.0);
        // too large an amplitude
        let all_neg = vec![-1i8; count];
        assert!(perturbed_uniform(&all_neg, 0.5, j, d, 3).is_err());
        assert!(perturbed_uniform(&eps, a, j, d, 1).is_err());
    }

    #[test]
    fn sample_single_cell() {
        let mut values = vec![0.0; 16];
        values[5] = 16.0;
        let g = GridDensity::new(2, 2, values).unwrap();
        for x in sample(&g, 1000, 7) {
            assert_eq!(haar::cube_of(&x, 2).unwrap().linear(), 5);
        }
    }

    #[test]
    fn sample_is_reproducible() {
        let g = bump(2, 4).unwrap();
        assert_eq!(sample(&g, 100, 42), sample(&g, 100, 42));
        assert_ne!(sample(&g, 100, 42), sample(&g, 100, 43));
    }

    #[test]
    fn family_spec_json() {
        let spec: DensityFamilySpec = serde_json::from_str(
            r#"{"kind":"bump_mixture","weight":0.5,"d":2,"R":4}"#,
        )
        .unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.len(), 1);
        assert!((g[0].integral() - 1.0).abs() < 1e-12);
        assert!(g[0].min() >= 0.5 - 1e-12);
    }
}
