//! Alias tables and the estimator resample distribution.

use crate::density::{point_in_cell, GridDensity};
use crate::error::{arg, Result};
use crate::estimators::DiscreteMeasure;
use crate::rng::{self, Stream};

/// Walker alias table. Bin `b` keeps itself with probability `prob[b]` and
/// otherwise yields `alias[b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AliasTable {
    pub prob: Vec<f64>,
    pub alias: Vec<usize>,
}

impl AliasTable {
    pub fn build(weights: &[f64]) -> Result<AliasTable> {
        if weights.is_empty() {
            return arg("alias table needs at least one weight");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return arg("alias weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return arg("alias weights sum to zero");
        }
        let n = weights.len();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small = Vec::new();
        let mut large = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s <= 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] <= 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
            alias[i] = i;
        }
        Ok(AliasTable { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// One draw; consumes exactly two values from the stream.
    #[inline]
    pub fn draw(&self, stream: &mut Stream) -> usize {
        let bin = rng::index(stream, self.len());
        let coin = rng::unit(stream);
        if coin < self.prob[bin] {
            bin
        } else {
            self.alias[bin]
        }
    }

    /// The categorical distribution the table induces.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut w: Vec<f64> = self.prob.iter().map(|p| p / n).collect();
        for (a, &b) in self.alias.iter().enumerate() {
            w[b] += (1.0 - self.prob[a]) / n;
        }
        w
    }
}

pub fn build_alias(weights: &[f64]) -> Result<AliasTable> {
    AliasTable::build(weights)
}

/// Anything that can be resampled.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    Grid(&'a GridDensity),
    Atoms(&'a DiscreteMeasure),
}

/// `M` i.i.d. draws from `src` with weights `1/M`.
pub fn resample_distribution(src: Source<'_>, m: usize, seed: u64) -> Result<DiscreteMeasure> {
    if m == 0 {
        return arg("M must be at least 1");
    }
    let mut stream = rng::stream(seed);
    let points = match src {
        Source::Grid(g) => {
            let table = AliasTable::build(&g.masses())?;
            (0..m)
                .map(|_| point_in_cell(g.function(), table.draw(&mut stream), &mut stream))
                .collect()
        }
        Source::Atoms(mu) => {
            let table = AliasTable::build(&mu.weights)?;
            (0..m)
                .map(|_| mu.points[table.draw(&mut stream)].clone())
                .collect()
        }
    };
    DiscreteMeasure::uniform(points)
}

/// Exponent beyond which resampling no longer improves the rate: `(1 + 1/p) / (1 + 2/d)`.
pub fn gamma_star(p: f64, d: usize) -> f64 {
    (1.0 + 1.0 / p) / (1.0 + 2.0 / d as f64)
}

/// `M = ceil(n^gamma)`; values within `1e-9` relative of an integer snap to it.
/// The second component is a warning when `gamma` exceeds [`gamma_star`].
pub fn choose_m(n: usize, gamma: f64, p: f64, d: usize) -> Result<(usize, Option<String>)> {
    if n == 0 {
        return arg("n must be positive");
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return arg(format!("gamma = {gamma} must be at least 1"));
    }
    let x = (n as f64).powf(gamma);
    if x > 1e15 {
        return arg(format!("n^gamma = {x:e} atoms is beyond any feasible M"));
    }
    let r = x.round();
    let m = if (x - r).abs() <= 1e-9 * r { r } else { x.ceil() };
    let g_star = gamma_star(p, d);
    let warning = (gamma > g_star + 1e-12).then(|| {
        format!("gamma = {gamma} exceeds the useful exponent {g_star:.4} for p={p}, d={d}")
    });
    Ok((m as usize, warning))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_tables() {
        let t = AliasTable::build(&[3.0]).unwrap();
        assert_eq!(t.prob, vec![1.0]);
        let t = AliasTable::build(&[0.5, 0.5]).unwrap();
        assert_eq!(t.prob, vec![1.0, 1.0]);
        assert_eq!(t.alias, vec![0, 1]);
        assert!(AliasTable::build(&[0.0, 0.0]).is_err());
        assert!(AliasTable::build(&[]).is_err());
        assert!(AliasTable::build(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn reconstruction_identity() {
        let mut s = rng::stream(1);
        let w: Vec<f64> = (0..1000).map(|_| rng::unit(&mut s).powi(3)).collect();
        let total: f64 = w.iter().sum();
        let t = AliasTable::build(&w).unwrap();
        for (a, b) in t.reconstruct().iter().zip(&w) {
            assert!((a - b / total).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_never_drawn() {
        let t = AliasTable::build(&[0.0, 1.0, 0.0, 2.0]).unwrap();
        let mut s = rng::stream(5);
        for _ in 0..10_000 {
            let b = t.draw(&mut s);
            assert!(b == 1 || b == 3);
        }
    }

    #[test]
    fn choose_m_examples() {
        assert_eq!(choose_m(100, 1.0, 1.0, 3).unwrap().0, 100);
        assert_eq!(choose_m(100, 1.5, 1.0, 3).unwrap().0, 1000);
        let g = gamma_star(1.0, 4);
        assert!((g - 4.0 / 3.0).abs() < 1e-15);
        let (m, warn) = choose_m(4096, g, 1.0, 4).unwrap();
        assert!((65535..=65537).contains(&m));
        assert!(warn.is_none());
        assert!(choose_m(4096, 1.5, 1.0, 4).unwrap().1.is_some());
        assert!(choose_m(10, 0.5, 1.0, 3).is_err());
    }

    #[test]
    fn single_atom_source() {
        let mu = DiscreteMeasure::new(vec![vec![0.2, 0.7]], vec![1.0]).unwrap();
        let r = resample_distribution(Source::Atoms(&mu), 17, 3).unwrap();
        assert_eq!(r.points.len(), 17);
        assert!(r.points.iter().all(|x| x == &vec![0.2, 0.7]));
        assert!(r.weights.iter().all(|&w| w == 1.0 / 17.0));
    }
}
