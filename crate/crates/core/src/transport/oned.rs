use super::{check_pair, cost};
use crate::error::{arg, Result};
use crate::estimators::DiscreteMeasure;

/// `W_p` on the line via the monotone (quantile) coupling.
pub fn wp_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    if mu.d() != 1 {
        return arg(format!("quantile coupling needs d = 1, got d = {}", mu.d()));
    }
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m
            .points
            .iter()
            .zip(&m.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, &w)| (x[0], w))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let t = ra.min(rb);
        total += t * cost(&[a[i].0], &[b[j].0], p);
        ra -= t;
        rb -= t;
        // the smaller block is now exactly zero; a rounding residue on the
        // last block of either side is dropped when the other side runs out
        if ra <= 0.0 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        }
        if rb <= 0.0 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    Ok(total.max(0.0).powf(1.0 / p))
}
