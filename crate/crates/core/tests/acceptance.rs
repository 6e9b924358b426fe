//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines show up in plain
//! `cargo test` output.

mod common;

use std::time::Instant;

use smoothot::estimators::coefficient_deviation;
use smoothot::haar::{enumerate_level, eval_haar, level_len, HaarIndex};
use smoothot::harness::{
    run_notnorm_experiment, run_rate_experiment, run_resample_experiment, run_sandwich_experiment, EstimatorKind,
    ExperimentConfig,
};
use smoothot::rng;
use smoothot::transport::{exact_wp, sinkhorn_wp, wp_1d};

const ORACLE_TOL: f64 = 1e-9;
const HAAR_TOL: f64 = 1e-12;
const RATE_HIST_TOL: f64 = 0.10;
const RATE_EMP_TOL: f64 = 0.08;
const RESAMPLE_TOL: f64 = 0.08;
const NOTNORM_TOL: f64 = 0.05;
const DRIFT_LIMIT: f64 = 2.0;
const CERT_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).expect("valid acceptance config")
}

/// 200 random instances: exact solver against quantile coupling (d = 1) and
/// vertex enumeration (at most 4 x 4).
fn oracle_equivalence() -> Outcome {
    let mut s = rng::stream(101);
    let (mut worst_1d, mut worst_bf) = (0.0f64, 0.0f64);
    let (mut n1d, mut nbf) = (0, 0);
    for k in 0..200 {
        let d = 1 + k % 3;
        let p = if k % 2 == 0 { 1.0 } else { 2.0 };
        let small = k % 4 < 2;
        let (n, m) = if small {
            (1 + rng::index(&mut s, 4), 1 + rng::index(&mut s, 4))
        } else {
            (1 + rng::index(&mut s, 50), 1 + rng::index(&mut s, 50))
        };
        let ties = k % 5 == 0;
        let mu = common::random_measure(&mut s, n, d, ties);
        let nu = common::random_measure(&mut s, m, d, ties);
        let w = exact_wp(&mu, &nu, p).expect("exact solver").0;
        if d == 1 {
            worst_1d = worst_1d.max((w - wp_1d(&mu, &nu, p).unwrap()).abs());
            n1d += 1;
        }
        if small {
            let bf = common::brute_force_wpp(&mu, &nu, p);
            worst_bf = worst_bf.max((w.powf(p) - bf).abs());
            nbf += 1;
        }
    }
    outcome(
        worst_1d <= ORACLE_TOL && worst_bf <= ORACLE_TOL,
        format!("max |exact - 1d| = {worst_1d:.1e} over {n1d}, max |exact^p - enumeration| = {worst_bf:.1e} over {nbf}"),
    )
}

fn sinkhorn_contract() -> Outcome {
    let mut s = rng::stream(202);
    let mut worst = [0.0f64; 2];
    let mut iterations = 0;
    for k in 0..100 {
        let d = 1 + k % 3;
        let p = if k % 2 == 0 { 1.0 } else { 2.0 };
        let (n, m) = (2 + rng::index(&mut s, 29), 2 + rng::index(&mut s, 29));
        let mu = common::random_measure(&mut s, n, d, k % 7 == 0);
        let nu = common::random_measure(&mut s, m, d, false);
        let exact = exact_wp(&mu, &nu, p).unwrap().0.powf(p);
        for (slot, eps) in [1e-2, 1e-3].into_iter().enumerate() {
            let r = sinkhorn_wp(&mu, &nu, p, eps).expect("sinkhorn converges");
            worst[slot] = worst[slot].max((r.value - exact).abs() / eps);
            iterations += r.iterations;
        }
    }
    outcome(
        worst.iter().all(|&w| w <= 1.0),
        format!(
            "max error / eps = {:.3} (eps 1e-2), {:.3} (eps 1e-3); {iterations} iterations in total",
            worst[0], worst[1]
        ),
    )
}

fn bound_sandwich() -> Outcome {
    let cfg = config(&std::fs::read_to_string(common::repo_root().join("configs/sandwich.json")).unwrap());
    let report = match run_sandwich_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("suite aborted: {e}")),
    };
    let mut violations = 0;
    for row in &report.rows {
        let r = &row.record;
        let tol = CERT_TOL * r.exact.max(1.0);
        violations += usize::from(r.exact > r.dyadic_ub + tol);
        violations += usize::from(r.separated_lb.is_some_and(|lb| lb > r.exact + tol));
        violations += usize::from(r.moser_ub.is_some_and(|ub| r.exact > ub + r.slack + tol));
        violations += usize::from(r.besov_inf > r.besov_one + tol);
    }
    let separated = report.rows.iter().filter(|r| r.record.separated_lb.is_some()).count();
    let flow = report.rows.iter().filter(|r| r.record.moser_ub.is_some()).count();
    outcome(
        violations == 0,
        format!(
            "{} records ({separated} with a separated bound, {flow} with a flow bound), {violations} violations; max ratios {:.3} / {:.3}",
            report.rows.len(),
            report.max_ratio_inf.unwrap_or(f64::NAN),
            report.max_ratio_one.unwrap_or(f64::NAN)
        ),
    )
}

fn rate() -> Outcome {
    let cfg = config(&std::fs::read_to_string(common::repo_root().join("configs/rate_d3.json")).unwrap());
    let r = match run_rate_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let target = -r.theoretical_exponent;
    let hist = r.fit(EstimatorKind::Histogram).unwrap();
    let emp = r.fit(EstimatorKind::Empirical).unwrap();
    let h: Vec<_> = r.rows_for(EstimatorKind::Histogram).collect();
    let e: Vec<_> = r.rows_for(EstimatorKind::Empirical).collect();
    let dominated = (h.len() - 2..h.len()).all(|i| h[i].mean <= e[i].mean + 2.0 * h[i].se.hypot(e[i].se));
    let pass = (hist.slope - target).abs() <= RATE_HIST_TOL
        && (emp.slope - target).abs() <= RATE_EMP_TOL
        && !hist.flagged
        && !emp.flagged
        && dominated;
    outcome(
        pass,
        format!(
            "histogram slope {:.3} (se {:.3}), empirical slope {:.3} (se {:.3}), target {target:.3}; histogram <= empirical at the two largest n: {dominated}",
            hist.slope, hist.se, emp.slope, emp.se
        ),
    )
}

fn resample_rate() -> Outcome {
    let cfg = config(&std::fs::read_to_string(common::repo_root().join("configs/resample_d3.json")).unwrap());
    let r = match run_resample_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let fit = r.fit.unwrap();
    let target = -r.theoretical_exponent;
    outcome(
        (fit.slope - target).abs() <= RESAMPLE_TOL && !fit.flagged,
        format!("slope {:.3} (se {:.3}, r2 {:.4}), target {target:.3}", fit.slope, fit.se, fit.r2),
    )
}

fn blow_up() -> Outcome {
    let cfg = config(&std::fs::read_to_string(common::repo_root().join("configs/notnorm.json")).unwrap());
    let r = run_notnorm_experiment(&cfg).unwrap();
    let s2 = r.fit(2.0).unwrap().slope;
    let s1 = r.fit(1.0).unwrap().slope;
    // the same sweep on the line, reported for reference
    let mut line = cfg.clone();
    line.d = 1;
    line.resolution = Some(8);
    let l2 = run_notnorm_experiment(&line).unwrap().fit(2.0).unwrap().slope;
    outcome(
        (s2 + 0.5).abs() <= NOTNORM_TOL && s1.abs() <= NOTNORM_TOL,
        format!(
            "d={} R={}: p=2 slope {s2:.4}, p=1 slope {s1:.1e} (d=1 R=8 gives p=2 slope {l2:.4})",
            cfg.d,
            cfg.resolution.unwrap()
        ),
    )
}

/// Inner product of two Haar functions whose supports are nested, computed on
/// the children of the finer support, where both are constant.
fn inner(a: &HaarIndex, b: &HaarIndex) -> f64 {
    let d = b.d();
    let child = b.level + 1;
    let h = (-(child as f64)).exp2();
    let vol = h.powi(d as i32);
    (0..1usize << d)
        .map(|corner| {
            let x: Vec<f64> = (0..d)
                .map(|i| ((2 * b.cube[i] + (corner >> i & 1) as u32) as f64 + 0.5) * h)
                .collect();
            eval_haar(a, &x) * eval_haar(b, &x) * vol
        })
        .sum()
}

fn ancestors(b: &HaarIndex) -> Vec<HaarIndex> {
    let d = b.d();
    let mut out = vec![HaarIndex::scaling(d)];
    for j in 0..=b.level {
        let cube: Vec<u32> = b.cube.iter().map(|&k| k >> (b.level - j)).collect();
        for pattern in 1..1u32 << d {
            out.push(HaarIndex { level: j, cube: cube.clone(), pattern });
        }
    }
    out
}

fn wavelet_properties() -> Outcome {
    let top = 4u32;
    let (mut orth, mut norm, mut local) = (0.0f64, 0.0f64, 0usize);
    let mut count_ok = true;
    let mut pairs = 0usize;
    for d in 1..=3usize {
        let mut total = 1;
        for j in 0..=top {
            let level: Vec<HaarIndex> = enumerate_level(d, j).collect();
            let distinct: std::collections::HashSet<_> = level.iter().cloned().collect();
            count_ok &= level.len() == level_len(d, j) && distinct.len() == level.len();
            count_ok &= level.len() == ((1 << d) - 1) * (1 << (d as u32 * j));
            total += level.len();
            for b in &level {
                for a in ancestors(b) {
                    let want = if a == *b { 1.0 } else { 0.0 };
                    orth = orth.max((inner(&a, b) - want).abs());
                    pairs += 1;
                }
                // |psi| = 2^{dj/2} on the support, so ||psi||_p = 2^{dj(1/2 - 1/p)}
                for p in [1.0, 1.5, 2.0, 3.0] {
                    let h = (-((j + 1) as f64)).exp2();
                    let vol = h.powi(d as i32);
                    let mut integral = 0.0;
                    for corner in 0..1usize << d {
                        let x: Vec<f64> =
                            (0..d).map(|i| ((2 * b.cube[i] + (corner >> i & 1) as u32) as f64 + 0.5) * h).collect();
                        integral += eval_haar(b, &x).abs().powf(p) * vol;
                    }
                    let want = (d as f64 * j as f64 * (0.5 - 1.0 / p)).exp2();
                    norm = norm.max((integral.powf(1.0 / p) - want).abs() / want);
                }
                // zero just outside every face of the support
                let side = (-(j as f64)).exp2();
                for axis in 0..d {
                    for dir in [-1.0, 1.0] {
                        let mut x: Vec<f64> = b.cube.iter().map(|&k| (k as f64 + 0.5) * side).collect();
                        x[axis] += dir * side;
                        if (0.0..=1.0).contains(&x[axis]) && eval_haar(b, &x) != 0.0 {
                            local += 1;
                        }
                    }
                }
            }
            count_ok &= total == 1 << (d as u32 * (j + 1));
        }
    }
    let pass = orth <= HAAR_TOL && norm <= HAAR_TOL && local == 0 && count_ok;
    outcome(
        pass,
        format!(
            "d<=3, levels<=4: max orthonormality error {orth:.1e} over {pairs} nested pairs, max relative norm error {norm:.1e}, {local} locality failures, counts ok: {count_ok}"
        ),
    )
}

fn coefficient_scaling() -> Outcome {
    let mut worst = 1.0f64;
    let mut parts = Vec::new();
    for d in [1usize, 2, 3] {
        let mut constants = Vec::new();
        for n in [1usize << 10, 1 << 12, 1 << 14] {
            let dev = coefficient_deviation(d, n, 4, 40, 300 + d as u64).unwrap();
            for (j, v) in dev.iter().enumerate() {
                constants.push(v / ((d * j) as f64).exp2() * (n as f64).sqrt());
            }
        }
        let max = constants.iter().cloned().fold(f64::MIN, f64::max);
        let min = constants.iter().cloned().fold(f64::MAX, f64::min);
        worst = worst.max(max / min);
        parts.push(format!("d={d}: C in [{min:.3}, {max:.3}]"));
    }
    outcome(
        worst < DRIFT_LIMIT,
        format!("{}; max drift {worst:.3} across j in 0..3, n in 2^10..2^14", parts.join(", ")),
    )
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    common::run_smoke_suite(a.path());
    common::run_smoke_suite(b.path());
    let files = common::deterministic_files(a.path());
    let same_set = files == common::deterministic_files(b.path());
    let differing: Vec<String> = files
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).ok().unwrap_or_default())
        .map(|f| f.display().to_string())
        .collect();
    outcome(
        same_set && differing.is_empty() && !files.is_empty(),
        format!("{} files compared, differing: {:?}", files.len(), differing),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 9] = [
        ("oracle equivalence", 60.0, oracle_equivalence),
        ("sinkhorn contract", 120.0, sinkhorn_contract),
        ("bound sandwich", 120.0, bound_sandwich),
        ("rate d=3 s=0 p=1", 900.0, rate),
        ("resampling rate", 600.0, resample_rate),
        ("W_p / L1 blow-up", 60.0, blow_up),
        ("wavelet system properties", 30.0, wavelet_properties),
        ("coefficient deviation scaling", 120.0, coefficient_scaling),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let pass = o.pass && secs <= *budget;
        failed += usize::from(!pass);
        let budget = if budget.is_finite() { format!(", limit {budget}s") } else { String::new() };
        println!(
            "criterion {}: {} {name}: {} ({secs:.1}s{budget})",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
