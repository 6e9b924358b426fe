//! Experiment driver: rate, resampling, trade-off, sandwich and not-a-norm
//! experiments, with CSV/JSON/TSV outputs.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]; replication
//! `r` draws from seed `base_seed + r`. Wall-clock times go to a separate
//! `timings.csv` so that all other outputs are byte-reproducible.

use serde::{Deserialize, Serialize};

mod config;
mod experiments;
mod output;

pub use config::{EstimatorKind, ExperimentConfig, ExperimentKind, SandwichSweep};
pub use experiments::{
    run, run_notnorm_experiment, run_rate_experiment, run_resample_experiment, run_sandwich_experiment,
    run_tradeoff_experiment, EstimatorFit, NotNormFit, NotNormReport, NotNormRow, RateReport, RateRow,
    ResampleReport, ResampleRow, SandwichReport, SandwichRow, TradeoffReport, TradeoffRow,
};
pub use output::{write_outputs, ExperimentOutput, Timing, SCHEMA_VERSION};

/// Which rate to report: upper or lower, bounded or unbounded densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentRegime {
    BoundedUb,
    BoundedLb,
    UnboundedUb,
    UnboundedLb,
}

/// Exponent `a` of the rate `n^{-a}` (logarithmic factors dropped).
pub fn theoretical_exponent(regime: ExponentRegime, d: usize, s: f64, p: f64) -> f64 {
    let df = d as f64;
    match regime {
        ExponentRegime::BoundedUb | ExponentRegime::BoundedLb => {
            if d >= 3 {
                (1.0 + s) / (df + 2.0 * s)
            } else {
                0.5
            }
        }
        ExponentRegime::UnboundedUb => {
            if df > 2.0 * p {
                (1.0 + s / p) / (df + 2.0 * s)
            } else {
                1.0 / (2.0 * p)
            }
        }
        ExponentRegime::UnboundedLb => ((1.0 + s / p) / (df + s)).min(1.0 / (2.0 * p)),
    }
}

/// Least-squares line through `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals.
    pub se: f64,
    pub r2: f64,
    pub points: usize,
    /// `r2 < 0.9`: the slope should not be trusted.
    pub flagged: bool,
}

pub const MIN_R2: f64 = 0.9;

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let n = x.len();
    if n < 2 || n != y.len() || x.iter().chain(y).any(|v| !v.is_finite()) {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(SlopeFit { slope, intercept, se, r2, points: n, flagged: r2 < MIN_R2 })
}

/// Fit of `log y` against `log x` (natural logs, so the slope is the exponent).
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents() {
        use ExponentRegime::*;
        assert_eq!(theoretical_exponent(UnboundedUb, 3, 0.0, 1.0), 1.0 / 3.0);
        assert_eq!(theoretical_exponent(BoundedUb, 3, 1.0, 1.0), 2.0 / 5.0);
        assert_eq!(theoretical_exponent(UnboundedUb, 1, 0.0, 1.0), 0.5);
        assert_eq!(theoretical_exponent(BoundedUb, 2, 3.0, 1.0), 0.5);
        assert_eq!(theoretical_exponent(BoundedLb, 1, 0.5, 2.0), 0.5);
        // d = 2p falls in the low-dimensional branch (log factor dropped)
        assert_eq!(theoretical_exponent(UnboundedUb, 4, 0.5, 2.0), 0.25);
        assert_eq!(theoretical_exponent(UnboundedUb, 5, 0.5, 2.0), 1.25 / 6.0);
        // lower bound: the slower of the two rates
        assert_eq!(theoretical_exponent(UnboundedLb, 3, 0.0, 1.0), 1.0 / 3.0);
        assert_eq!(theoretical_exponent(UnboundedLb, 1, 0.0, 1.0), 0.5);
        assert_eq!(theoretical_exponent(UnboundedLb, 3, 2.0, 2.0), 0.25);
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-15 && (f.intercept - 2.0).abs() < 1e-14);
        assert!(f.se < 1e-15 && (f.r2 - 1.0).abs() < 1e-15 && !f.flagged);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn noisy_line_is_flagged() {
        let f = fit_line(&[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, -1.0, 0.5]).unwrap();
        assert!(f.flagged);
    }

    #[test]
    fn loglog_power_law() {
        let x = [8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.0 / 3.0)).collect();
        assert!((fit_loglog(&x, &y).unwrap().slope + 1.0 / 3.0).abs() < 1e-14);
    }
}
