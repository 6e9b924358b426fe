#![allow(dead_code)]

use std::path::{Path, PathBuf};

use smoothot::estimators::DiscreteMeasure;
use smoothot::harness::{self, ExperimentConfig};
use smoothot::rng;

/// Squared-norm-to-the-p cost, written independently of the library.
pub fn cost(x: &[f64], y: &[f64], p: f64) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt().powf(p)
}

/// Flows on a candidate basis, or `None` if the cells contain a cycle or the
/// solution is infeasible.
fn basis_flows(cells: &[(usize, usize)], a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let mut flow = vec![f64::NAN; cells.len()];
    let mut open: Vec<usize> = (0..cells.len()).collect();
    while !open.is_empty() {
        let mut progressed = false;
        for k in 0..open.len() {
            let (i, j) = cells[open[k]];
            let row_deg = open.iter().filter(|&&c| cells[c].0 == i).count();
            let col_deg = open.iter().filter(|&&c| cells[c].1 == j).count();
            let f = if row_deg == 1 {
                ra[i]
            } else if col_deg == 1 {
                rb[j]
            } else {
                continue;
            };
            flow[open[k]] = f;
            ra[i] -= f;
            rb[j] -= f;
            open.swap_remove(k);
            progressed = true;
            break;
        }
        if !progressed {
            return None;
        }
    }
    let scale = a.iter().sum::<f64>();
    let ok = flow.iter().all(|&f| f >= -1e-12 * scale)
        && ra.iter().chain(&rb).all(|r| r.abs() <= 1e-12 * scale.max(1.0));
    ok.then_some(flow)
}

/// `W_p^p` by enumerating every vertex of the transportation polytope.
/// Vertices are basic feasible solutions on `n + m - 1` cells.
pub fn brute_force_wpp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    let (n, m) = (mu.len(), nu.len());
    assert!(n * m <= 16, "brute force is for tiny instances");
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let cells: Vec<(usize, usize)> = pick.iter().map(|&c| all[c]).collect();
        if let Some(flow) = basis_flows(&cells, &mu.weights, &nu.weights) {
            let c: f64 = cells
                .iter()
                .zip(&flow)
                .map(|(&(i, j), &f)| f.max(0.0) * cost(&mu.points[i], &nu.points[j], p))
                .sum();
            best = best.min(c);
        }
        // next k-subset in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < all.len() - k + i {
                pick[i] += 1;
                for t in i + 1..k {
                    pick[t] = pick[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Random weighted atoms in `[0,1]^d`; with `ties` some atoms share coordinates.
pub fn random_measure(s: &mut rng::Stream, k: usize, d: usize, ties: bool) -> DiscreteMeasure {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        if ties && i > 0 && rng::unit(s) < 0.3 {
            let j = rng::index(s, i);
            pts.push(pts[j].clone());
        } else if ties && rng::unit(s) < 0.3 {
            pts.push((0..d).map(|_| (rng::index(s, 5) as f64) / 4.0).collect());
        } else {
            pts.push((0..d).map(|_| rng::unit(s)).collect());
        }
    }
    let w: Vec<f64> = (0..k).map(|_| rng::unit(s) + 0.01).collect();
    DiscreteMeasure::normalized(pts, w).unwrap()
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub const SMOKE: [&str; 5] = ["rate", "resample", "tradeoff", "sandwich", "notnorm"];

pub fn smoke_config(name: &str) -> ExperimentConfig {
    let path = repo_root().join("configs/smoke").join(format!("{name}.json"));
    ExperimentConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// Runs every smoke config into `dir/<name>`.
pub fn run_smoke_suite(dir: &Path) {
    for name in SMOKE {
        let cfg = smoke_config(name);
        let out = harness::run(&cfg).unwrap();
        harness::write_outputs(&out, &cfg, &dir.join(name)).unwrap();
    }
}

/// Relative paths of the deterministic outputs under `dir`, sorted.
pub fn deterministic_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "timings.csv" {
                files.push(path.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}
