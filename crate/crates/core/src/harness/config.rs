use serde::{Deserialize, Serialize};

use super::ExponentRegime;
use crate::density::DensityFamilySpec;
use crate::error::{arg, Result};
use crate::estimators::{OracleMethod, Regime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rate,
    ResampleRate,
    Tradeoff,
    Sandwich,
    Notnorm,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Rate => "rate",
            ExperimentKind::ResampleRate => "resample_rate",
            ExperimentKind::Tradeoff => "tradeoff",
            ExperimentKind::Sandwich => "sandwich",
            ExperimentKind::Notnorm => "notnorm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Cell-count histogram at the selected level.
    Histogram,
    /// Uniform atoms on the sample.
    Empirical,
    /// Histogram projected onto densities bounded below by `m`.
    Bounded,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Histogram => "histogram",
            EstimatorKind::Empirical => "empirical",
            EstimatorKind::Bounded => "bounded",
        }
    }
}

/// Instances of the sandwich suite. Each dimension contributes perturbed
/// uniform pairs, bump mixtures against the uniform density and separated
/// two-bump pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichSweep {
    pub dims: Vec<usize>,
    pub p: Vec<f64>,
    /// Random sign pairs per dimension and perturbation level.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_weights")]
    pub mixture_weights: Vec<f64>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
}

fn default_pairs() -> usize {
    3
}

fn default_weights() -> Vec<f64> {
    vec![0.1, 0.3]
}

fn default_lambdas() -> Vec<f64> {
    vec![0.25, 0.5]
}

/// One experiment, as read from a JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Truth density (rate, resample_rate, tradeoff).
    #[serde(default)]
    pub truth: Option<DensityFamilySpec>,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub s: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Lower bound for the bounded estimator.
    #[serde(default)]
    pub m: f64,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    /// Resample sizes (resample_rate).
    #[serde(default, rename = "M_grid")]
    pub m_grid: Vec<usize>,
    /// `M = n^gamma` exponents (tradeoff).
    #[serde(default)]
    pub gamma: Vec<f64>,
    /// Multiplier of `M^{-p/d}` giving the Sinkhorn accuracy (tradeoff).
    #[serde(default = "default_eps_scale")]
    pub eps_scale: f64,
    #[serde(default)]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_regime")]
    pub level_regime: Regime,
    /// Rate whose exponent is reported next to the fitted slope.
    #[serde(default = "default_exponent_regime")]
    pub exponent_regime: ExponentRegime,
    /// Histogram level of the fixed source (resample_rate).
    #[serde(default)]
    pub source_n: Option<usize>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_method")]
    pub method: OracleMethod,
    /// Values of `lambda` and `p` for notnorm.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub p_list: Vec<f64>,
    #[serde(default, rename = "R")]
    pub resolution: Option<u32>,
    #[serde(default)]
    pub sandwich: Option<SandwichSweep>,
    /// Output directory, overridable from the command line.
    #[serde(default)]
    pub out: Option<String>,
}

fn default_d() -> usize {
    1
}

fn default_p() -> f64 {
    1.0
}

fn default_eps_scale() -> f64 {
    0.5
}

fn default_regime() -> Regime {
    Regime::UnboundedThm5
}

fn default_exponent_regime() -> ExponentRegime {
    ExponentRegime::UnboundedUb
}

fn default_reps() -> usize {
    3
}

fn default_method() -> OracleMethod {
    OracleMethod::DyadicUb { j_max: Some(16) }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn truth(&self) -> Result<&DensityFamilySpec> {
        match &self.truth {
            Some(t) => Ok(t),
            None => arg(format!("{} experiment needs a truth density", self.experiment.name())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn increasing<T: PartialOrd + Copy>(v: &[T]) -> bool {
            v.windows(2).all(|w| w[0] < w[1])
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return arg(format!("p = {} not in [1, inf)", self.p));
        }
        if self.d == 0 || self.d > crate::haar::MAX_DIM {
            return arg(format!("d = {} out of range", self.d));
        }
        if let Some(t) = &self.truth {
            if t.d != self.d {
                return arg(format!("truth has d = {} but the config says d = {}", t.d, self.d));
            }
        }
        let needs_slope = matches!(
            self.experiment,
            ExperimentKind::Rate | ExperimentKind::ResampleRate | ExperimentKind::Tradeoff
        );
        if needs_slope && self.replications < 3 {
            return arg("slope fits need at least 3 replications");
        }
        match self.experiment {
            ExperimentKind::Rate => {
                self.truth()?;
                if self.n_grid.is_empty() || !increasing(&self.n_grid) || self.n_grid[0] == 0 {
                    return arg("n_grid must be nonempty, positive and strictly increasing");
                }
                if self.estimators.is_empty() {
                    return arg("rate experiment needs at least one estimator");
                }
                if self.estimators.contains(&EstimatorKind::Bounded) && !(self.m > 0.0 && self.m < 1.0) {
                    return arg(format!("bounded estimator needs m in (0,1), got {}", self.m));
                }
            }
            ExperimentKind::ResampleRate => {
                self.truth()?;
                if self.m_grid.is_empty() || !increasing(&self.m_grid) || self.m_grid[0] == 0 {
                    return arg("M_grid must be nonempty, positive and strictly increasing");
                }
                if self.source_n.unwrap_or(0) == 0 {
                    return arg("resample_rate needs source_n");
                }
            }
            ExperimentKind::Tradeoff => {
                self.truth()?;
                if self.n_grid.len() != 1 || self.n_grid[0] < 2 {
                    return arg("tradeoff uses a single n >= 2 in n_grid");
                }
                if self.gamma.is_empty() || !increasing(&self.gamma) || self.gamma[0] < 1.0 {
                    return arg("gamma list must be increasing and start at or above 1");
                }
                if !(self.eps_scale > 0.0) {
                    return arg("eps_scale must be positive");
                }
            }
            ExperimentKind::Sandwich => {
                let Some(sw) = &self.sandwich else {
                    return arg("sandwich experiment needs a sandwich sweep");
                };
                if sw.dims.is_empty() || sw.p.is_empty() {
                    return arg("sandwich sweep needs dimensions and exponents");
                }
                if sw.dims.iter().any(|&d| d == 0 || d > 3) {
                    return arg("sandwich dimensions must lie in 1..=3");
                }
                if sw.p.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
                    return arg("sandwich exponents must lie in [1, inf)");
                }
            }
            ExperimentKind::Notnorm => {
                if self.lambdas.len() < 2 || self.p_list.is_empty() {
                    return arg("notnorm needs at least two lambdas and one p");
                }
                if self.lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                    return arg("lambdas must lie in (0, 1]; lambda = 0 has zero distance");
                }
                if self.p_list.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
                    return arg("notnorm exponents must lie in [1, inf)");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rate_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "rate", "d": 2,
                "truth": {"kind": "bump_mixture", "weight": 0.5, "d": 2, "R": 4},
                "n_grid": [16, 32], "estimators": ["histogram", "empirical"],
                "replications": 3, "base_seed": 7,
                "method": {"method": "dyadic_ub", "j_max": 12}}"#,
        )
        .unwrap();
        assert_eq!(cfg.method, OracleMethod::DyadicUb { j_max: Some(12) });
        assert_eq!(cfg.level_regime, Regime::UnboundedThm5);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"experiment": "rate", "n_grid": [4, 2], "estimators": ["empirical"],
                "truth": {"kind": "uniform", "d": 1, "R": 2}}"#,
            r#"{"experiment": "rate", "n_grid": [2, 4], "estimators": ["empirical"],
                "replications": 2, "truth": {"kind": "uniform", "d": 1, "R": 2}}"#,
            r#"{"experiment": "rate", "n_grid": [2, 4], "estimators": ["empirical"], "d": 2,
                "truth": {"kind": "uniform", "d": 1, "R": 2}}"#,
            r#"{"experiment": "notnorm", "lambdas": [0.0, 0.5], "p_list": [2]}"#,
            r#"{"experiment": "rate", "typo": 1}"#,
        ];
        for text in bad {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }
}
