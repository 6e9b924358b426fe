//! Dyadic partition of `[0,1]^d` and the tensor-product Haar system.
//!
//! Cubes are half-open, `[k 2^-j, (k+1) 2^-j)`, except that the face
//! `x_i = 1` belongs to the last cube along axis `i`.
//!
//! A wavelet at level `j` is indexed by its cube and a nonzero bitmask
//! `pattern`; bit `i` set means axis `i` carries the mother wavelet, clear
//! means it carries the (normalised) indicator. Pattern `0` at level `0` is
//! the constant scaling function. Within a level, coefficients are stored
//! lexicographically by cube index (row-major, last axis fastest) and then
//! by pattern ascending: `flat = cube_linear * (2^d - 1) + pattern - 1`.
//!
//! A [`WaveletCoeffs`] truncated at `J` carries wavelet levels `0..J`, which
//! is exactly the span of functions constant on level-`J` cubes.

use serde::{Deserialize, Serialize};

use crate::density::GridFunction;
use crate::error::{arg, Error, Result};

/// Largest supported dimension (patterns are `u32` bitmasks, cube counts `usize`).
pub const MAX_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CubeId {
    pub level: u32,
    pub index: Vec<u32>,
}

impl CubeId {
    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.index.len()
            && point
                .iter()
                .zip(&self.index)
                .all(|(&x, &k)| axis_cell(x, self.level) == Some(k))
    }

    /// Row-major position among the `2^{dj}` cubes of the level.
    pub fn linear(&self) -> usize {
        linear_index(&self.index, self.level)
    }

    /// Lower and upper corner.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.side();
        let lo: Vec<f64> = self.index.iter().map(|&k| k as f64 * h).collect();
        let hi = lo.iter().map(|&a| a + h).collect();
        (lo, hi)
    }
}

/// Cell index of coordinate `x` along one axis at `level`; `None` outside `[0,1]`.
#[inline]
pub fn axis_cell(x: f64, level: u32) -> Option<u32> {
    if !(0.0..=1.0).contains(&x) {
        return None;
    }
    let side = 1u64 << level;
    let k = (x * side as f64) as u64;
    Some(k.min(side - 1) as u32)
}

pub fn cube_of(point: &[f64], level: u32) -> Result<CubeId> {
    let index = point
        .iter()
        .map(|&x| {
            axis_cell(x, level)
                .ok_or_else(|| Error::Domain(format!("coordinate {x} outside [0,1]")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CubeId { level, index })
}

#[inline]
pub(crate) fn linear_index(index: &[u32], level: u32) -> usize {
    index
        .iter()
        .fold(0usize, |acc, &k| (acc << level) | k as usize)
}

#[inline]
pub(crate) fn multi_index(linear: usize, d: usize, level: u32) -> Vec<u32> {
    let mask = (1usize << level) - 1;
    (0..d)
        .map(|i| ((linear >> ((d - 1 - i) as u32 * level)) & mask) as u32)
        .collect()
}

/// Parent linear index at `level - 1` and the bitmask of axes on which the
/// child sits in the upper half (bit `i` for axis `i`).
#[inline]
pub(crate) fn parent_and_half(linear: usize, d: usize, level: u32) -> (usize, u32) {
    let mask = (1usize << level) - 1;
    let mut parent = 0usize;
    let mut half = 0u32;
    for i in 0..d {
        let k = (linear >> ((d - 1 - i) as u32 * level)) & mask;
        parent = (parent << (level - 1)) | (k >> 1);
        half |= ((k & 1) as u32) << i;
    }
    (parent, half)
}

#[inline]
pub(crate) fn pattern_sign(pattern: u32, half: u32) -> f64 {
    if (pattern & half).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Number of wavelets at level `j`: `(2^d - 1) 2^{dj}`.
pub fn level_len(d: usize, level: u32) -> usize {
    ((1usize << d) - 1) << (d as u32 * level)
}

#[inline]
pub(crate) fn level_scale(d: usize, level: u32) -> f64 {
    (d as f64 * level as f64 / 2.0).exp2()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HaarIndex {
    pub level: u32,
    pub cube: Vec<u32>,
    pub pattern: u32,
}

impl HaarIndex {
    pub fn scaling(d: usize) -> Self {
        HaarIndex {
            level: 0,
            cube: vec![0; d],
            pattern: 0,
        }
    }

    pub fn wavelet(level: u32, cube: Vec<u32>, pattern: u32) -> Result<Self> {
        let idx = HaarIndex {
            level,
            cube,
            pattern,
        };
        idx.validate()?;
        if pattern == 0 {
            return arg("wavelet pattern must be nonzero");
        }
        Ok(idx)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.cube.len();
        if d == 0 || d > MAX_DIM {
            return arg(format!("dimension {d} not in 1..={MAX_DIM}"));
        }
        if self.pattern >= 1 << d {
            return arg(format!("pattern {:#b} has bits beyond d={d}", self.pattern));
        }
        if self.pattern == 0 && self.level != 0 {
            return arg("the zero pattern is reserved for the level-0 scaling function");
        }
        if self.cube.iter().any(|&k| k >= 1 << self.level) {
            return arg(format!("cube index out of range at level {}", self.level));
        }
        Ok(())
    }

    pub fn is_scaling(&self) -> bool {
        self.pattern == 0
    }

    pub fn d(&self) -> usize {
        self.cube.len()
    }

    /// Position within the level's coefficient vector.
    pub fn flat(&self) -> usize {
        let per_cube = (1usize << self.d()) - 1;
        linear_index(&self.cube, self.level) * per_cube + self.pattern as usize - 1
    }

    pub fn from_flat(d: usize, level: u32, flat: usize) -> Self {
        let per_cube = (1usize << d) - 1;
        HaarIndex {
            level,
            cube: multi_index(flat / per_cube, d, level),
            pattern: (flat % per_cube) as u32 + 1,
        }
    }

    pub fn support(&self) -> CubeId {
        CubeId {
            level: self.level,
            index: self.cube.clone(),
        }
    }
}

/// All wavelets of level `j` in storage order.
pub fn enumerate_level(d: usize, level: u32) -> impl Iterator<Item = HaarIndex> {
    (0..level_len(d, level)).map(move |f| HaarIndex::from_flat(d, level, f))
}

pub fn eval_haar(idx: &HaarIndex, point: &[f64]) -> f64 {
    if point.len() != idx.d() {
        return 0.0;
    }
    if idx.is_scaling() {
        return if point.iter().all(|x| (0.0..=1.0).contains(x)) {
            1.0
        } else {
            0.0
        };
    }
    let mut sign = 1.0;
    for (axis, (&x, &k)) in point.iter().zip(&idx.cube).enumerate() {
        match axis_cell(x, idx.level) {
            Some(c) if c == k => {}
            _ => return 0.0,
        }
        if idx.pattern >> axis & 1 == 1 {
            let upper = axis_cell(x, idx.level + 1).unwrap() & 1;
            if upper == 1 {
                sign = -sign;
            }
        }
    }
    sign * level_scale(idx.d(), idx.level)
}

/// Haar coefficients of a function on `[0,1]^d`, truncated below level `levels`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoeffs {
    pub d: usize,
    #[serde(rename = "J")]
    pub levels: u32,
    pub alpha: f64,
    pub betas: Vec<Vec<f64>>,
}

impl WaveletCoeffs {
    pub fn zeros(d: usize, levels: u32) -> Self {
        WaveletCoeffs {
            d,
            levels,
            alpha: 0.0,
            betas: (0..levels).map(|j| vec![0.0; level_len(d, j)]).collect(),
        }
    }

    /// The uniform density: `alpha = 1`, all wavelet coefficients zero.
    pub fn uniform(d: usize, levels: u32) -> Self {
        WaveletCoeffs {
            alpha: 1.0,
            ..Self::zeros(d, levels)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return arg(format!("dimension {} not in 1..={MAX_DIM}", self.d));
        }
        if self.betas.len() != self.levels as usize {
            return arg(format!(
                "expected {} coefficient levels, found {}",
                self.levels,
                self.betas.len()
            ));
        }
        for (j, b) in self.betas.iter().enumerate() {
            if b.len() != level_len(self.d, j as u32) {
                return arg(format!("level {j} has {} coefficients", b.len()));
            }
        }
        Ok(())
    }

    pub fn get(&self, idx: &HaarIndex) -> f64 {
        if idx.is_scaling() {
            self.alpha
        } else {
            self.betas
                .get(idx.level as usize)
                .map_or(0.0, |b| b[idx.flat()])
        }
    }

    pub fn set(&mut self, idx: &HaarIndex, value: f64) {
        if idx.is_scaling() {
            self.alpha = value;
        } else {
            self.betas[idx.level as usize][idx.flat()] = value;
        }
    }

    pub fn same_shape(&self, other: &WaveletCoeffs) -> Result<()> {
        if self.d != other.d || self.levels != other.levels {
            return arg(format!(
                "coefficient trees differ in shape: (d={}, J={}) vs (d={}, J={})",
                self.d, self.levels, other.d, other.levels
            ));
        }
        Ok(())
    }

    /// Coefficient-wise `self - other`.
    pub fn sub(&self, other: &WaveletCoeffs) -> Result<WaveletCoeffs> {
        self.same_shape(other)?;
        Ok(WaveletCoeffs {
            d: self.d,
            levels: self.levels,
            alpha: self.alpha - other.alpha,
            betas: self
                .betas
                .iter()
                .zip(&other.betas)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        })
    }

    pub fn scale(&self, t: f64) -> WaveletCoeffs {
        WaveletCoeffs {
            d: self.d,
            levels: self.levels,
            alpha: t * self.alpha,
            betas: self
                .betas
                .iter()
                .map(|b| b.iter().map(|x| t * x).collect())
                .collect(),
        }
    }

    /// `sqrt(alpha^2 + sum beta^2)`, the `L_2` norm of the represented function.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.betas.iter().flatten().map(|b| b * b).sum();
        (self.alpha * self.alpha + s).sqrt()
    }
}

/// Empirical coefficients `(1/n) sum_i psi(X_i)` for every wavelet below level `levels`.
pub fn analyze_samples(samples: &[Vec<f64>], levels: u32) -> Result<WaveletCoeffs> {
    let Some(first) = samples.first() else {
        return arg("empty sample");
    };
    let d = first.len();
    let mut c = WaveletCoeffs::zeros(d, levels);
    c.validate()?;
    c.alpha = 1.0;
    let n_pat = 1u32 << d;
    let mut cells = vec![0u32; d];
    for x in samples {
        if x.len() != d {
            return arg("samples have inconsistent dimension");
        }
        // finest index once; coarser levels are prefixes
        for (i, &xi) in x.iter().enumerate() {
            cells[i] = axis_cell(xi, levels)
                .ok_or_else(|| Error::Domain(format!("sample coordinate {xi} outside [0,1]")))?;
        }
        for j in 0..levels {
            let shift = levels - j;
            let mut cube = 0usize;
            let mut half = 0u32;
            for (i, &k) in cells.iter().enumerate() {
                cube = (cube << j) | (k >> shift) as usize;
                half |= ((k >> (shift - 1)) & 1) << i;
            }
            let scale = level_scale(d, j);
            let base = cube * (n_pat as usize - 1);
            let level = &mut c.betas[j as usize];
            for p in 1..n_pat {
                level[base + p as usize - 1] += pattern_sign(p, half) * scale;
            }
        }
    }
    let inv_n = 1.0 / samples.len() as f64;
    for b in c.betas.iter_mut().flatten() {
        *b *= inv_n;
    }
    Ok(c)
}

/// Cell masses of `values` (given per cell at `level`) summed onto every
/// coarser level; `result[j]` has `2^{dj}` entries, `result[level]` is the input.
pub(crate) fn mass_pyramid(d: usize, level: u32, masses: Vec<f64>) -> Vec<Vec<f64>> {
    let mut pyramid = vec![Vec::new(); level as usize + 1];
    pyramid[level as usize] = masses;
    for j in (1..=level).rev() {
        let mut coarse = vec![0.0; 1usize << (d as u32 * (j - 1))];
        for (lin, &m) in pyramid[j as usize].iter().enumerate() {
            let (parent, _) = parent_and_half(lin, d, j);
            coarse[parent] += m;
        }
        pyramid[j as usize - 1] = coarse;
    }
    pyramid
}

/// Exact Haar coefficients `int g psi` of a piecewise-constant function.
pub fn analyze_grid(g: &GridFunction, levels: u32) -> Result<WaveletCoeffs> {
    if g.level < levels {
        return arg(format!(
            "grid resolution {} is coarser than requested level {levels}",
            g.level
        ));
    }
    let d = g.d;
    let pyramid = mass_pyramid(d, g.level, g.masses());
    let mut c = WaveletCoeffs::zeros(d, levels);
    c.alpha = pyramid[0][0];
    let per_cube = (1usize << d) - 1;
    for j in 0..levels {
        let scale = level_scale(d, j);
        let level = &mut c.betas[j as usize];
        for (lin, &m) in pyramid[j as usize + 1].iter().enumerate() {
            let (parent, half) = parent_and_half(lin, d, j + 1);
            let base = parent * per_cube;
            for p in 1..=per_cube as u32 {
                level[base + p as usize - 1] += pattern_sign(p, half) * scale * m;
            }
        }
    }
    Ok(c)
}

/// Piecewise-constant function with the given coefficients, tabulated on the
/// level-`resolution` grid. The output may be negative.
pub fn synthesize(c: &WaveletCoeffs, resolution: u32) -> Result<GridFunction> {
    c.validate()?;
    if resolution < c.levels {
        return arg(format!(
            "resolution {resolution} cannot represent {} wavelet levels",
            c.levels
        ));
    }
    let d = c.d;
    let per_cube = (1usize << d) - 1;
    let mut values = vec![c.alpha];
    for j in 0..c.levels {
        let scale = level_scale(d, j);
        let level = &c.betas[j as usize];
        let mut next = vec![0.0; 1usize << (d as u32 * (j + 1))];
        for (lin, v) in next.iter_mut().enumerate() {
            let (parent, half) = parent_and_half(lin, d, j + 1);
            let base = parent * per_cube;
            let mut acc = values[parent];
            for p in 1..=per_cube as u32 {
                acc += pattern_sign(p, half) * scale * level[base + p as usize - 1];
            }
            *v = acc;
        }
        values = next;
    }
    GridFunction::new(d, c.levels, values)?.refine(resolution)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_of_examples() {
        assert_eq!(cube_of(&[0.3, 0.7], 1).unwrap().index, vec![0, 1]);
        assert_eq!(cube_of(&[0.0, 0.0, 0.0], 5).unwrap().index, vec![0, 0, 0]);
        assert_eq!(cube_of(&[0.99], 4).unwrap().index, vec![15]);
        assert_eq!(cube_of(&[1.0], 3).unwrap().index, vec![7]);
        assert!(matches!(cube_of(&[1.2], 1), Err(Error::Domain(_))));
        assert!(matches!(cube_of(&[-0.1, 0.5], 1), Err(Error::Domain(_))));
        assert!(matches!(cube_of(&[f64::NAN], 1), Err(Error::Domain(_))));
    }

    #[test]
    fn cube_contains_its_points() {
        let c = cube_of(&[0.3, 0.7, 0.51], 3).unwrap();
        assert!(c.contains(&[0.3, 0.7, 0.51]));
        assert!(!c.contains(&[0.3, 0.7, 0.1]));
        assert_eq!(c.side(), 0.125);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_haar(&HaarIndex::scaling(3), &[0.2, 0.9, 0.5]), 1.0);
        let mother = HaarIndex::wavelet(0, vec![0], 1).unwrap();
        assert_eq!(eval_haar(&mother, &[0.25]), 1.0);
        assert_eq!(eval_haar(&mother, &[0.75]), -1.0);

        // tensor product of two level-1 univariate values, each +-sqrt(2)
        let w = HaarIndex::wavelet(1, vec![1, 0], 0b11).unwrap();
        let center = [0.75, 0.25];
        for (dx, dy, expected) in [
            (-0.1, -0.1, 2.0),
            (0.1, -0.1, -2.0),
            (-0.1, 0.1, -2.0),
            (0.1, 0.1, 2.0),
        ] {
            let v = eval_haar(&w, &[center[0] + dx, center[1] + dy]);
            assert!((v - expected).abs() < 1e-15, "{v}");
        }
        assert_eq!(eval_haar(&w, &[0.25, 0.25]), 0.0);
    }

    #[test]
    fn flat_roundtrip() {
        for d in 1..=3 {
            for j in 0..3 {
                for (f, idx) in enumerate_level(d, j).enumerate() {
                    assert_eq!(idx.flat(), f);
                }
            }
        }
    }

    #[test]
    fn single_sample() {
        let c = analyze_samples(&[vec![0.25]], 1).unwrap();
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.betas[0], vec![1.0]);
        assert!(analyze_samples(&[], 2).is_err());
    }

    #[test]
    fn synthesize_examples() {
        let c = WaveletCoeffs::uniform(2, 2);
        let g = synthesize(&c, 3).unwrap();
        assert!(g.values.iter().all(|&v| v == 1.0));

        let mut c = WaveletCoeffs::uniform(1, 1);
        c.betas[0][0] = 0.5;
        let g = synthesize(&c, 1).unwrap();
        assert_eq!(g.values, vec![1.5, 0.5]);
        assert!(synthesize(&WaveletCoeffs::uniform(1, 3), 2).is_err());
    }

    #[test]
    fn analyze_grid_examples() {
        let u = GridFunction::constant(2, 3, 1.0);
        let c = analyze_grid(&u, 3).unwrap();
        assert!((c.alpha - 1.0).abs() < 1e-15);
        assert!(c.betas.iter().flatten().all(|&b| b.abs() < 1e-15));

        // 1 + psi for the level-0 mother wavelet in d = 1
        let g = GridFunction::new(1, 3, vec![2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let c = analyze_grid(&g, 3).unwrap();
        assert!((c.alpha - 1.0).abs() < 1e-15);
        assert!((c.betas[0][0] - 1.0).abs() < 1e-15);
        assert!(c.betas[1..].iter().flatten().all(|&b| b.abs() < 1e-15));

        assert!(analyze_grid(&u, 4).is_err());
    }

    #[test]
    fn analyze_grid_matches_pointwise_inner_products() {
        let d = 2;
        let level = 3;
        let values: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 / 5.0).collect();
        let g = GridFunction::new(d, level, values).unwrap();
        let c = analyze_grid(&g, level).unwrap();
        for j in 0..level {
            for idx in enumerate_level(d, j) {
                let direct: f64 = (0..g.cells())
                    .map(|lin| g.values[lin] * eval_haar(&idx, &g.cell_center(lin)))
                    .sum::<f64>()
                    * g.cell_volume();
                assert!((direct - c.get(&idx)).abs() < 1e-12);
            }
        }
    }
}
