//! Entropic transport with rounding to a feasible plan.
//!
//! Log-domain Sinkhorn iterations on costs rescaled by `d^{p/2}` (so every
//! cost lies in `[0,1]`), with the temperature lowered geometrically to
//! `eps' / (4 ln n)`. After each temperature stage the scaled plan is
//! rounded onto the transport polytope; the rounded plan's cost is an upper
//! bound on `W_p^p` and the c-transformed potentials give a lower bound.
//! Iteration stops once the two are within `eps`, or the marginal violation
//! drops below `eps' / 8`, after which rounding alone guarantees the
//! accuracy.

use serde::Serialize;

use super::{check_pair, cost, support, TransportPlan};
use crate::error::{Error, Result};
use crate::estimators::DiscreteMeasure;

pub const MAX_ITERATIONS: usize = 100_000;

/// How often the gap is certified during the final stage.
const CHECK_EVERY: usize = 25;

#[derive(Clone, Debug, Serialize)]
pub struct SinkhornResult {
    /// Cost of the rounded plan: an upper bound on `W_p^p` within `eps` of it.
    pub value: f64,
    /// Dual lower bound on `W_p^p`.
    pub lower: f64,
    pub iterations: usize,
    /// `L1` marginal violation of the unrounded plan at exit.
    pub violation: f64,
    /// Final temperature in normalised cost units.
    pub temperature: f64,
    pub plan: TransportPlan,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct Problem {
    n: usize,
    m: usize,
    c: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Problem {
    fn plan(&self, f: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.n * self.m];
        for i in 0..self.n {
            for j in 0..self.m {
                p[i * self.m + j] = ((f[i] + g[j] - self.c[i * self.m + j]) / eta).exp();
            }
        }
        p
    }

    /// Rounding onto the polytope: scale rows and columns down to their
    /// targets, then spread the deficit as a rank-one correction.
    fn round(&self, mut p: Vec<f64>) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        for i in 0..n {
            let r: f64 = p[i * m..(i + 1) * m].iter().sum();
            if r > self.a[i] {
                let s = self.a[i] / r;
                p[i * m..(i + 1) * m].iter_mut().for_each(|x| *x *= s);
            }
        }
        for j in 0..m {
            let c: f64 = (0..n).map(|i| p[i * m + j]).sum();
            if c > self.b[j] {
                let s = self.b[j] / c;
                (0..n).for_each(|i| p[i * m + j] *= s);
            }
        }
        let er: Vec<f64> = (0..n)
            .map(|i| (self.a[i] - p[i * m..(i + 1) * m].iter().sum::<f64>()).max(0.0))
            .collect();
        let ec: Vec<f64> = (0..m)
            .map(|j| (self.b[j] - (0..n).map(|i| p[i * m + j]).sum::<f64>()).max(0.0))
            .collect();
        let total: f64 = er.iter().sum();
        if total > 0.0 {
            for i in 0..n {
                for j in 0..m {
                    p[i * m + j] += er[i] * ec[j] / total;
                }
            }
        }
        p
    }

    fn primal(&self, p: &[f64]) -> f64 {
        p.iter().zip(&self.c).map(|(x, c)| x * c).sum()
    }

    /// `sum a f + sum b g` after a double c-transform of `f`.
    fn dual(&self, f: &[f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let g: Vec<f64> = (0..m)
            .map(|j| (0..n).map(|i| self.c[i * m + j] - f[i]).fold(f64::INFINITY, f64::min))
            .collect();
        let f2: Vec<f64> = (0..n)
            .map(|i| (0..m).map(|j| self.c[i * m + j] - g[j]).fold(f64::INFINITY, f64::min))
            .collect();
        self.a.iter().zip(&f2).map(|(a, f)| a * f).sum::<f64>() + self.b.iter().zip(&g).map(|(b, g)| b * g).sum::<f64>()
    }

    /// Column-marginal `L1` violation (rows are exact after an `f` update).
    fn violation(&self, f: &[f64], g: &[f64], eta: f64) -> f64 {
        (0..self.m)
            .map(|j| {
                let s: f64 = (0..self.n).map(|i| ((f[i] + g[j] - self.c[i * self.m + j]) / eta).exp()).sum();
                (s - self.b[j]).abs()
            })
            .sum()
    }
}

/// Additive `eps` approximation of `W_p^p(mu, nu)`.
pub fn sinkhorn_wp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, eps: f64) -> Result<SinkhornResult> {
    check_pair(mu, nu, p)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return crate::error::arg(format!("eps = {eps} must be positive"));
    }
    if !(mu.in_unit_cube() && nu.in_unit_cube()) {
        return Err(Error::Domain("sinkhorn needs atoms in [0,1]^d".into()));
    }
    let (ri, a) = support(mu);
    let (ci, b) = support(nu);
    let (n, m) = (a.len(), b.len());
    let scale = (mu.d() as f64).powf(p / 2.0);
    let mut c = Vec::with_capacity(n * m);
    for &i in &ri {
        for &j in &ci {
            c.push(cost(&mu.points[i], &nu.points[j], p) / scale);
        }
    }
    let prob = Problem { n, m, c, a, b };
    let target = eps / scale;
    let eta_final = target / (4.0 * (n.max(m).max(2) as f64).ln());

    let la: Vec<f64> = prob.a.iter().map(|x| x.ln()).collect();
    let lb: Vec<f64> = prob.b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut eta = eta_final.max(0.5);
    let mut iterations = 0;
    let mut violation;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;

    let certify = |f: &[f64], g: &[f64], eta: f64, best: &mut Option<(f64, f64, Vec<f64>)>| -> bool {
        let rounded = prob.round(prob.plan(f, g, eta));
        let upper = prob.primal(&rounded);
        let lower = prob.dual(f);
        let lower = best.as_ref().map_or(lower, |bst| bst.1.max(lower));
        if best.as_ref().is_none_or(|bst| upper < bst.0) {
            *best = Some((upper, lower, rounded));
        } else if let Some(bst) = best.as_mut() {
            bst.1 = lower;
        }
        let bst = best.as_ref().unwrap();
        bst.0 - bst.1 <= target
    };

    'stages: loop {
        let last = eta <= eta_final;
        let stage_tol = if last { target / 8.0 } else { eta.max(target / 8.0) };
        let mut stage_iters = 0;
        loop {
            for j in 0..m {
                g[j] = eta * lb[j] - eta * log_sum_exp((0..n).map(|i| (f[i] - prob.c[i * m + j]) / eta));
            }
            for i in 0..n {
                f[i] = eta * la[i] - eta * log_sum_exp((0..m).map(|j| (g[j] - prob.c[i * m + j]) / eta));
            }
            iterations += 1;
            stage_iters += 1;
            violation = prob.violation(&f, &g, eta);
            if violation <= stage_tol {
                if certify(&f, &g, eta, &mut best) || last {
                    break 'stages;
                }
                break;
            }
            if last && stage_iters % CHECK_EVERY == 0 && certify(&f, &g, eta, &mut best) {
                break 'stages;
            }
            if iterations >= MAX_ITERATIONS {
                if certify(&f, &g, eta, &mut best) {
                    break 'stages;
                }
                return Err(Error::Convergence { iterations, violation });
            }
        }
        eta = (eta * 0.5).max(eta_final);
    }

    let (upper, lower, rounded) = best.expect("certified at least once");
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let v = rounded[i * m + j];
            if v > 0.0 {
                entries.push((ri[i], ci[j], v));
            }
        }
    }
    Ok(SinkhornResult {
        value: upper * scale,
        lower: lower * scale,
        iterations,
        violation,
        temperature: eta,
        plan: TransportPlan {
            rows: mu.len(),
            cols: nu.len(),
            entries,
            cost: upper * scale,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::transport::exact_wp;

    fn random(s: &mut rng::Stream, k: usize, d: usize) -> DiscreteMeasure {
        let pts = (0..k).map(|_| (0..d).map(|_| rng::unit(s)).collect()).collect();
        let w: Vec<f64> = (0..k).map(|_| rng::unit(s) + 0.05).collect();
        DiscreteMeasure::normalized(pts, w).unwrap()
    }

    #[test]
    fn identical_measures() {
        let mut s = rng::stream(2);
        let mu = random(&mut s, 10, 2);
        let r = sinkhorn_wp(&mu, &mu, 1.0, 1e-2).unwrap();
        assert!(r.value <= 1e-2);
    }

    #[test]
    fn within_eps_of_exact() {
        let mut s = rng::stream(3);
        let mu = random(&mut s, 20, 2);
        let nu = random(&mut s, 20, 2);
        for p in [1.0, 2.0] {
            let exact = exact_wp(&mu, &nu, p).unwrap().0.powf(p);
            for eps in [1e-2, 1e-3] {
                let r = sinkhorn_wp(&mu, &nu, p, eps).unwrap();
                assert!(r.value >= exact - 1e-12, "rounded plan is feasible");
                assert!(r.value - exact <= eps, "p={p} eps={eps}: {} vs {exact}", r.value);
                assert!(r.lower <= exact + 1e-12);
                assert!(r.plan.marginal_error(&mu.weights, &nu.weights) < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_eps() {
        let mut s = rng::stream(3);
        let mu = random(&mut s, 3, 1);
        assert!(sinkhorn_wp(&mu, &mu, 1.0, 0.0).is_err());
    }
}
