//! Flow-based upper bound `W_p(f, g) <= m^{1/p - 1} ||V||_{L_p}` for densities
//! bounded below by `m`, with `div V = f - g`.
//!
//! Each Haar wavelet `psi = prod_i psi_i` gets the field that is zero except
//! along its lowest wavelet axis `k`, where it equals
//! `(int_0^{x_k} psi_k) prod_{i != k} psi_i(x_i)`: a hat of height
//! `2^{-j/2}/2` along `x_k` times a constant. On a cell of the finest grid
//! every component is therefore affine in its own coordinate and constant in
//! the others.

use crate::error::{arg, Result};
use crate::haar::{multi_index, synthesize, WaveletCoeffs};
use crate::quad::gauss_legendre;

const QUAD_POINTS: usize = 12;

/// `int_lo^hi |u|^p du`.
fn abs_pow_integral(lo: f64, hi: f64, p: f64) -> f64 {
    let g = |u: f64| u.signum() * u.abs().powf(p + 1.0) / (p + 1.0);
    g(hi) - g(lo)
}

/// `int_{-s/2}^{s/2} |a + b t|^p dt`.
fn affine_abs_pow(a: f64, b: f64, s: f64, p: f64) -> f64 {
    if b == 0.0 {
        return s * a.abs().powf(p);
    }
    let (u0, u1) = (a - b * s / 2.0, a + b * s / 2.0);
    abs_pow_integral(u0.min(u1), u0.max(u1), p) / b.abs()
}

/// Per-cell affine coefficients `(A, B)` of each field component.
fn field(diff: &WaveletCoeffs) -> (Vec<f64>, Vec<f64>) {
    let d = diff.d;
    let top = diff.levels;
    let cells = 1usize << (d as u32 * top);
    let mut a = vec![0.0; cells * d];
    let mut b = vec![0.0; cells * d];
    let per_cube = (1usize << d) - 1;
    let fine = (-(top as f64)).exp2();
    for (j, level) in diff.betas.iter().enumerate() {
        let j = j as u32;
        let sub = top - j;
        let half = 1u32 << (sub - 1);
        let root = (j as f64 / 2.0).exp2();
        let h = (-(j as f64)).exp2();
        let others = (j as f64 * (d as f64 - 1.0) / 2.0).exp2();
        for (flat, &beta) in level.iter().enumerate() {
            if beta == 0.0 {
                continue;
            }
            let cube = multi_index(flat / per_cube, d, j);
            let pattern = (flat % per_cube) as u32 + 1;
            let k = pattern.trailing_zeros() as usize;
            let lo_k = cube[k] as f64 * h;
            for t in 0..1usize << (d as u32 * sub) {
                let off = multi_index(t, d, sub);
                let mut sign = 1.0;
                let mut cell = 0usize;
                for i in 0..d {
                    if i != k && pattern >> i & 1 == 1 && off[i] >= half {
                        sign = -sign;
                    }
                    cell = (cell << top) | ((cube[i] << sub) + off[i]) as usize;
                }
                let center = lo_k + (off[k] as f64 + 0.5) * fine;
                let (value, slope) = if off[k] < half {
                    (root * (center - lo_k), root)
                } else {
                    (root * (lo_k + h - center), -root)
                };
                let w = beta * sign * others;
                a[cell * d + k] += w * value;
                b[cell * d + k] += w * slope;
            }
        }
    }
    (a, b)
}

/// `||V||_{L_p}` for the field whose divergence is the function with
/// coefficients `diff` (the scaling coefficient must vanish).
pub fn moser_vector_field_norm(diff: &WaveletCoeffs, p: f64) -> Result<f64> {
    diff.validate()?;
    if diff.alpha.abs() > 1e-12 {
        return arg("the difference must have zero mean");
    }
    if diff.levels == 0 {
        return Ok(0.0);
    }
    let d = diff.d;
    let (a, b) = field(diff);
    let s = (-(diff.levels as f64)).exp2();
    let vol = s.powi(d as i32);
    let rule = gauss_legendre(QUAD_POINTS);
    let mut total = 0.0;
    for (ac, bc) in a.chunks(d).zip(b.chunks(d)) {
        let active: Vec<usize> = (0..d).filter(|&k| ac[k] != 0.0 || bc[k] != 0.0).collect();
        total += match active.len() {
            0 => 0.0,
            _ if p == 2.0 => vol * (0..d).map(|k| ac[k] * ac[k] + bc[k] * bc[k] * s * s / 12.0).sum::<f64>(),
            1 => vol / s * affine_abs_pow(ac[active[0]], bc[active[0]], s, p),
            _ => cell_quadrature(ac, bc, s, p, &rule),
        };
    }
    Ok(total.powf(1.0 / p))
}

/// Tensor Gauss-Legendre over a cell, each axis split where its component vanishes.
fn cell_quadrature(a: &[f64], b: &[f64], s: f64, p: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let d = a.len();
    let axes: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|k| {
            let mut cuts = vec![-s / 2.0, s / 2.0];
            if b[k] != 0.0 {
                let r = -a[k] / b[k];
                if r > -s / 2.0 && r < s / 2.0 {
                    cuts.insert(1, r);
                }
            }
            let mut nodes = Vec::new();
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
                for (&x, &wt) in rule.0.iter().zip(&rule.1) {
                    nodes.push((mid + half * x, wt * half));
                }
            }
            nodes
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let mut weight = 1.0;
        let mut norm2 = 0.0;
        for k in 0..d {
            let (t, w) = axes[k][idx[k]];
            weight *= w;
            let v = a[k] + b[k] * t;
            norm2 += v * v;
        }
        total += weight * norm2.powf(p / 2.0);
        let mut k = d;
        loop {
            if k == 0 {
                return total;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// `m^{1/p - 1} ||V||_{L_p}` for `div V = f - g`; both densities must be at least `m`.
pub fn moser_upper_bound(f: &WaveletCoeffs, g: &WaveletCoeffs, m: f64, p: f64) -> Result<f64> {
    if !(m > 0.0) {
        return arg(format!("lower bound m = {m} must be positive"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return arg(format!("p = {p} not in [1, inf)"));
    }
    f.same_shape(g)?;
    for (name, c) in [("f", f), ("g", g)] {
        let min = synthesize(c, c.levels)?.min();
        if min < m - 1e-12 {
            return arg(format!("{name} drops to {min} below m = {m}"));
        }
    }
    Ok(m.powf(1.0 / p - 1.0) * moser_vector_field_norm(&f.sub(g)?, p)?)
}
