//! Primal network simplex for the transportation problem.
//!
//! Nodes are the sources `0..n`, the sinks `n..n+m` and an artificial root.
//! The initial tree joins every node to the root through a big-cost
//! artificial arc, which is strongly feasible; the leaving-arc rule keeps it
//! so, which rules out cycling. Entering arcs are chosen by block search.

use serde::Serialize;

use super::{check_pair, cost, support, TransportPlan};
use crate::error::{Error, Result};
use crate::estimators::DiscreteMeasure;

/// Largest cost matrix (`n * m` entries) accepted by default.
pub const DEFAULT_CAP: usize = 2000 * 2000;

const NONE: usize = usize::MAX;

/// Optimal plan together with dual potentials.
#[derive(Clone, Debug, Serialize)]
pub struct ExactSolution {
    /// `W_p`.
    pub value: f64,
    pub plan: TransportPlan,
    /// Dual potentials on the atoms of each side (zero-weight atoms included),
    /// feasible: `u_i + v_j <= c_ij`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Primal cost minus dual objective; nonnegative up to rounding.
    pub gap: f64,
    pub pivots: usize,
}

/// `W_p(mu, nu)` and an optimal plan.
pub fn exact_wp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<(f64, TransportPlan)> {
    let s = exact_wp_with_cap(mu, nu, p, DEFAULT_CAP)?;
    Ok((s.value, s.plan))
}

pub fn exact_wp_with_cap(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, cap: usize) -> Result<ExactSolution> {
    check_pair(mu, nu, p)?;
    let (ri, a) = support(mu);
    let (ci, b) = support(nu);
    let (n, m) = (a.len(), b.len());
    if n.saturating_mul(m) > cap {
        return Err(Error::Resource(format!(
            "exact solver limited to {cap} cost entries, instance has {n} x {m}; use sinkhorn"
        )));
    }
    let mut c = Vec::with_capacity(n * m);
    for &i in &ri {
        for &j in &ci {
            c.push(cost(&mu.points[i], &nu.points[j], p));
        }
    }
    let mut net = Network::new(n, m, c, &a, &b);
    net.solve();

    let mut entries: Vec<(usize, usize, f64)> = net.plan().into_iter().map(|(i, j, f)| (ri[i], ci[j], f)).collect();
    entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let primal: f64 = entries
        .iter()
        .map(|&(i, j, f)| f * cost(&mu.points[i], &nu.points[j], p))
        .sum();

    // u_i = -pi_i on sources; v_j tightened to the c-transform so the pair is feasible
    let mut u = vec![0.0; mu.len()];
    for (k, &i) in ri.iter().enumerate() {
        u[i] = -net.pi[k];
    }
    let v: Vec<f64> = (0..nu.len())
        .map(|j| {
            ri.iter()
                .map(|&i| cost(&mu.points[i], &nu.points[j], p) - u[i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let dual: f64 = ri.iter().map(|&i| mu.weights[i] * u[i]).sum::<f64>()
        + ci.iter().map(|&j| nu.weights[j] * v[j]).sum::<f64>();
    let gap = primal - dual;
    let scale = primal.abs().max(net.max_cost * 1e-9).max(1e-300);
    if gap > 1e-7 * scale {
        return Err(Error::Certificate(format!(
            "exact solver duality gap {gap:e} exceeds tolerance at cost {primal:e}"
        )));
    }
    Ok(ExactSolution {
        value: primal.max(0.0).powf(1.0 / p),
        plan: TransportPlan {
            rows: mu.len(),
            cols: nu.len(),
            entries,
            cost: primal,
        },
        u,
        v,
        gap,
        pivots: net.pivots,
    })
}

struct Network {
    n: usize,
    m: usize,
    root: usize,
    cost: Vec<f64>,
    art_cost: f64,
    max_cost: f64,
    tol: f64,
    parent: Vec<usize>,
    /// Arc joining a node to its parent: `< n*m` real, otherwise artificial.
    pred: Vec<usize>,
    /// Whether the pred arc points from the node to its parent.
    up: Vec<bool>,
    flow: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    pos: Vec<usize>,
    block: usize,
    cursor: usize,
    pivots: usize,
}

impl Network {
    fn new(n: usize, m: usize, cost: Vec<f64>, a: &[f64], b: &[f64]) -> Self {
        let nodes = n + m + 1;
        let root = n + m;
        let max_cost = cost.iter().copied().fold(0.0, f64::max);
        let art_cost = (max_cost + 1.0) * nodes as f64;
        let mut net = Network {
            n,
            m,
            root,
            cost,
            art_cost,
            max_cost,
            tol: 1e-12 * max_cost.max(1e-300),
            parent: vec![root; nodes],
            pred: (0..nodes).map(|v| n * m + v).collect(),
            up: vec![false; nodes],
            flow: vec![0.0; nodes],
            depth: vec![1; nodes],
            pi: vec![0.0; nodes],
            children: vec![Vec::new(); nodes],
            pos: vec![0; nodes],
            block: ((n * m) as f64).sqrt().ceil().max(10.0) as usize,
            cursor: 0,
            pivots: 0,
        };
        net.parent[root] = NONE;
        net.depth[root] = 0;
        for i in 0..n {
            net.up[i] = true;
            net.flow[i] = a[i];
            net.pi[i] = -art_cost;
        }
        for j in 0..m {
            net.flow[n + j] = b[j];
            net.pi[n + j] = art_cost;
        }
        for v in 0..root {
            net.pos[v] = net.children[root].len();
            net.children[root].push(v);
        }
        net
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.n * self.m {
            self.cost[arc]
        } else {
            self.art_cost
        }
    }

    /// Most negative reduced cost in the first block that has one.
    fn find_entering(&mut self) -> Option<(usize, f64)> {
        let total = self.n * self.m;
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        let mut in_block = 0;
        let mut k = self.cursor;
        while scanned < total {
            let (i, j) = (k / self.m, k % self.m);
            let rc = self.cost[k] + self.pi[i] - self.pi[self.n + j];
            if rc < -self.tol && best.is_none_or(|(_, r)| rc < r) {
                best = Some((k, rc));
            }
            scanned += 1;
            in_block += 1;
            k += 1;
            if k == total {
                k = 0;
            }
            if in_block == self.block {
                if best.is_some() {
                    break;
                }
                in_block = 0;
            }
        }
        self.cursor = k;
        best
    }

    fn detach(&mut self, v: usize) {
        let p = self.parent[v];
        let at = self.pos[v];
        self.children[p].swap_remove(at);
        if let Some(&moved) = self.children[p].get(at) {
            self.pos[moved] = at;
        }
    }

    fn attach(&mut self, v: usize, p: usize) {
        self.parent[v] = p;
        self.pos[v] = self.children[p].len();
        self.children[p].push(v);
    }

    fn pivot(&mut self, arc: usize, rc: f64) {
        let u = arc / self.m;
        let v = self.n + arc % self.m;
        let (mut x, mut y) = (u, v);
        while x != y {
            if self.depth[x] >= self.depth[y] {
                x = self.parent[x];
            } else {
                y = self.parent[y];
            }
        }
        let join = x;

        // the cycle runs join -> u -> v -> join; keep the last blocking arc
        let mut delta = f64::INFINITY;
        let mut out = NONE;
        let mut on_u_side = true;
        let mut w = u;
        while w != join {
            if self.up[w] && self.flow[w] < delta {
                delta = self.flow[w];
                out = w;
            }
            w = self.parent[w];
        }
        w = v;
        while w != join {
            if !self.up[w] && self.flow[w] <= delta {
                delta = self.flow[w];
                out = w;
                on_u_side = false;
            }
            w = self.parent[w];
        }
        debug_assert!(out != NONE, "uncapacitated cycle without a backward arc");

        if delta > 0.0 {
            let mut w = u;
            while w != join {
                self.flow[w] = if self.up[w] { (self.flow[w] - delta).max(0.0) } else { self.flow[w] + delta };
                w = self.parent[w];
            }
            w = v;
            while w != join {
                self.flow[w] = if self.up[w] { self.flow[w] + delta } else { (self.flow[w] - delta).max(0.0) };
                w = self.parent[w];
            }
        }

        let (start, anchor, up_flag, sigma) = if on_u_side {
            (u, v, true, -rc)
        } else {
            (v, u, false, rc)
        };
        let (mut child, mut new_parent, mut new_pred, mut new_up, mut new_flow) = (start, anchor, arc, up_flag, delta);
        loop {
            let old_parent = self.parent[child];
            let (old_pred, old_up, old_flow) = (self.pred[child], self.up[child], self.flow[child]);
            self.detach(child);
            self.attach(child, new_parent);
            self.pred[child] = new_pred;
            self.up[child] = new_up;
            self.flow[child] = new_flow;
            if child == out {
                break;
            }
            new_parent = child;
            new_pred = old_pred;
            new_up = !old_up;
            new_flow = old_flow;
            child = old_parent;
        }

        let mut stack = vec![start];
        while let Some(w) = stack.pop() {
            self.depth[w] = self.depth[self.parent[w]] + 1;
            self.pi[w] += sigma;
            stack.extend_from_slice(&self.children[w]);
        }
        self.pivots += 1;
    }

    /// Potentials recomputed from the tree, removing drift from repeated shifts.
    fn refresh_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut stack = self.children[self.root].clone();
        while let Some(w) = stack.pop() {
            let p = self.parent[w];
            let c = self.arc_cost(self.pred[w]);
            // arc w -> p: pi[p] = pi[w] + c; arc p -> w: pi[w] = pi[p] + c
            self.pi[w] = if self.up[w] { self.pi[p] - c } else { self.pi[p] + c };
            stack.extend_from_slice(&self.children[w]);
        }
    }

    fn solve(&mut self) {
        loop {
            while let Some((arc, rc)) = self.find_entering() {
                self.pivot(arc, rc);
            }
            self.refresh_potentials();
            if self.find_entering().is_none() {
                break;
            }
        }
    }

    fn plan(&self) -> Vec<(usize, usize, f64)> {
        let real = self.n * self.m;
        (0..self.root)
            .filter(|&w| self.pred[w] < real && self.flow[w] > 0.0)
            .map(|w| (self.pred[w] / self.m, self.pred[w] % self.m, self.flow[w]))
            .collect()
    }
}
