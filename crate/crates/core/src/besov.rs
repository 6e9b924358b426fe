//! Besov sequence norms `B^s_{p,q}` on Haar coefficients.
//!
//! ```text
//! ||f|| = |alpha| + || ( 2^{js} 2^{dj(1/2 - 1/p)} ||beta_j||_p )_j ||_q
//! ```
//!
//! Truncated trees are treated as having zero tail.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::haar::WaveletCoeffs;

/// Outer exponent `q`, which may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(v) => s.serialize_f64(*v),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) if v >= 1.0 => Ok(Exponent::Finite(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("q = {v} is below 1"))),
            Raw::Str(s) if s == "inf" || s == "infinity" => Ok(Exponent::Infinity),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("q = {s:?}: expected a number or \"inf\""))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: Exponent,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, q: Exponent) -> Result<Self> {
        let bp = BesovParams { s, p, q };
        bp.validate()?;
        Ok(bp)
    }

    /// `B^{-1}_{p,1}`.
    pub fn dual_one(p: f64) -> Self {
        BesovParams { s: -1.0, p, q: Exponent::Finite(1.0) }
    }

    /// `B^{-1}_{p,inf}`.
    pub fn dual_inf(p: f64) -> Self {
        BesovParams { s: -1.0, p, q: Exponent::Infinity }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() {
            return crate::error::arg("smoothness s must be finite");
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return crate::error::arg(format!("p = {} not in [1, inf)", self.p));
        }
        if let Exponent::Finite(q) = self.q {
            if !(q >= 1.0) {
                return crate::error::arg(format!("q = {q} below 1"));
            }
        }
        Ok(())
    }

    /// Weight `2^{js} 2^{dj(1/2 - 1/p)}` of level `j`.
    pub fn level_weight(&self, d: usize, j: u32) -> f64 {
        let j = j as f64;
        (j * self.s + d as f64 * j * (0.5 - 1.0 / self.p)).exp2()
    }
}

pub(crate) fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Weighted per-level terms `2^{js} 2^{dj(1/2-1/p)} ||beta_j||_p`.
pub fn level_terms(c: &WaveletCoeffs, bp: &BesovParams) -> Vec<f64> {
    c.betas
        .iter()
        .enumerate()
        .map(|(j, b)| bp.level_weight(c.d, j as u32) * lp_norm(b, bp.p))
        .collect()
}

pub fn besov_norm(c: &WaveletCoeffs, bp: &BesovParams) -> f64 {
    let terms = level_terms(c, bp);
    let tail = match bp.q {
        Exponent::Infinity => terms.iter().fold(0.0f64, |a, &t| a.max(t)),
        Exponent::Finite(q) => lp_norm(&terms, q),
    };
    c.alpha.abs() + tail
}

pub fn besov_distance(a: &WaveletCoeffs, b: &WaveletCoeffs, bp: &BesovParams) -> Result<f64> {
    Ok(besov_norm(&a.sub(b)?, bp))
}

/// Whether `c` describes a density in the ball `B^s_{p,q}(L)`: norm at most
/// `L`, nonnegative, and unit mass.
pub fn ball_membership(c: &WaveletCoeffs, bp: &BesovParams, radius: f64) -> bool {
    if c.validate().is_err() || (c.alpha - 1.0).abs() > 1e-10 {
        return false;
    }
    if besov_norm(c, bp) > radius {
        return false;
    }
    match crate::haar::synthesize(c, c.levels) {
        Ok(g) => g.min() >= -1e-12,
        Err(_) => false,
    }
}
