use crate::density::{box_set_gap, Box};
use crate::error::{arg, Result};
use crate::estimators::DiscreteMeasure;

fn mass_in(m: &DiscreteMeasure, set: &[Box]) -> f64 {
    m.points
        .iter()
        .zip(&m.weights)
        .filter(|(x, _)| set.iter().any(|b| b.contains(x)))
        .map(|(_, &w)| w)
        .sum()
}

/// `c |mu(S) - nu(S)|^{1/p}` with `c` the gap between `S` and `T`: any
/// coupling carries at least `|mu(S) - nu(S)|` mass across the gap.
pub fn separated_lower_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure, s: &[Box], t: &[Box], p: f64) -> Result<f64> {
    if s.is_empty() || t.is_empty() {
        return arg("both box sets must be nonempty");
    }
    let gap = box_set_gap(s, t);
    if !(gap > 0.0) {
        return arg("box sets touch; the gap must be positive");
    }
    for m in [mu, nu] {
        let leak = m
            .points
            .iter()
            .zip(&m.weights)
            .any(|(x, &w)| w > 0.0 && !s.iter().chain(t).any(|b| b.contains(x)));
        if leak {
            return arg("a measure has mass outside S and T");
        }
    }
    Ok(gap * (mass_in(mu, s) - mass_in(nu, s)).abs().powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxes() -> (Vec<Box>, Vec<Box>) {
        (
            vec![Box { lo: vec![0.0], hi: vec![0.25] }],
            vec![Box { lo: vec![0.75], hi: vec![1.0] }],
        )
    }

    #[test]
    fn examples() {
        let (s, t) = boxes();
        let mu = DiscreteMeasure::new(vec![vec![0.1]], vec![1.0]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![0.9]], vec![1.0]).unwrap();
        assert_eq!(separated_lower_bound(&mu, &nu, &s, &t, 2.0).unwrap(), 0.5);
        assert_eq!(separated_lower_bound(&mu, &mu, &s, &t, 1.0).unwrap(), 0.0);
        let leak = DiscreteMeasure::new(vec![vec![0.5]], vec![1.0]).unwrap();
        assert!(separated_lower_bound(&mu, &leak, &s, &t, 1.0).is_err());
        assert!(separated_lower_bound(&mu, &nu, &s, &s, 1.0).is_err());
    }
}
