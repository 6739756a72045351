//! Exponent arithmetic: critical thresholds, the β roots of regime I,
//! γ, and the q intervals of the weak maximum principle corollaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("m = {0} must be at least 2")]
    DimensionTooSmall(f64),
    #[error("p = {p} must lie in (p_c, 1) = ({p_c}, 1)")]
    BelowCritical { p: f64, p_c: f64 },
    #[error("p = {0} must lie in (0, 1)")]
    OutOfUnitInterval(f64),
    #[error("explicit beta = {beta} outside (beta1, beta2] ∩ (0, 1] = ({beta1}, {upper}]")]
    BetaOutOfRange { beta: f64, beta1: f64, upper: f64 },
    #[error("s = {0} must be at least 2")]
    SmallS(f64),
    #[error("q polynomial has negative discriminant: p = {p} is below the threshold {threshold}")]
    NegativeDiscriminant { p: f64, threshold: f64 },
    #[error("admissible q interval is empty")]
    EmptyInterval,
}

/// p_c = 1 - 2/m and p₀ = max(1/2, 1 - 1/√(m-1)).
pub fn critical_exponents(m: f64) -> Result<(f64, f64), ExponentError> {
    if !(m >= 2.0) {
        return Err(ExponentError::DimensionTooSmall(m));
    }
    let p_c = 1.0 - 2.0 / m;
    let p_0 = f64::max(0.5, 1.0 - 1.0 / (m - 1.0).sqrt());
    Ok((p_c, p_0))
}

/// Whether regime I (p_c < p < 1) is available.
pub fn regime_i_admissible(p: f64, m: f64) -> bool {
    critical_exponents(m).map_or(false, |(p_c, _)| p > p_c && p < 1.0)
}

/// Whether regime II (p₀ < p < 1) is available.
pub fn regime_ii_admissible(p: f64, m: f64) -> bool {
    critical_exponents(m).map_or(false, |(_, p0)| p > p0 && p < 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaPolicy {
    #[default]
    Midpoint,
    Explicit { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentData {
    pub p: f64,
    pub m: f64,
    pub p_c: f64,
    pub p_0: f64,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub regime_i_admissible: bool,
    pub regime_ii_admissible: bool,
}

/// β² - (2-p)/(1-p) β + m/2
pub fn beta_polynomial(p: f64, m: f64, beta: f64) -> f64 {
    beta * beta - (2.0 - p) / (1.0 - p) * beta + 0.5 * m
}

/// Roots (r₁ ≤ r₂) of x² - b x + c, computed without cancellation.
fn monic_roots(b: f64, c: f64) -> Option<(f64, f64)> {
    let mut disc = b * b - 4.0 * c;
    // Rounding at the threshold itself must not lose the double root.
    if disc < 0.0 && disc > -1e-12 * b * b {
        disc = 0.0;
    }
    if disc < 0.0 {
        return None;
    }
    let big = 0.5 * (b + b.signum() * disc.sqrt());
    if big == 0.0 {
        return Some((0.0, 0.0));
    }
    let small = c / big;
    Some((small.min(big), small.max(big)))
}

/// γ from -(1-p)[β² - (2-p)/(1-p) β + m/2] = 2/γ.
pub fn gamma_of(p: f64, m: f64, beta: f64) -> f64 {
    -2.0 / ((1.0 - p) * beta_polynomial(p, m, beta))
}

pub fn beta_selection(p: f64, m: f64, policy: BetaPolicy) -> Result<ExponentData, ExponentError> {
    let (p_c, p_0) = critical_exponents(m)?;
    if !(p > p_c && p < 1.0) {
        return Err(ExponentError::BelowCritical { p, p_c });
    }
    let (beta1, beta2) = monic_roots((2.0 - p) / (1.0 - p), 0.5 * m)
        .ok_or(ExponentError::BelowCritical { p, p_c })?;
    let beta = match policy {
        BetaPolicy::Midpoint => 0.5 * (beta1 + 1.0),
        BetaPolicy::Explicit { beta } => {
            let upper = beta2.min(1.0);
            if !(beta > beta1 && beta > 0.0 && beta <= upper) {
                return Err(ExponentError::BetaOutOfRange { beta, beta1, upper });
            }
            beta
        }
    };
    Ok(ExponentData {
        p,
        m,
        p_c,
        p_0,
        beta1: Some(beta1),
        beta2: Some(beta2),
        beta,
        gamma: gamma_of(p, m, beta),
        regime_i_admissible: true,
        regime_ii_admissible: p > p_0,
    })
}

/// Exponent summary that never fails for m ≥ 2: β data is filled in only
/// when regime I is available.
pub fn exponent_summary(p: f64, m: f64, policy: BetaPolicy) -> Result<ExponentData, ExponentError> {
    match beta_selection(p, m, policy) {
        Ok(d) => Ok(d),
        Err(ExponentError::BelowCritical { .. }) => {
            let (p_c, p_0) = critical_exponents(m)?;
            Ok(ExponentData {
                p,
                m,
                p_c,
                p_0,
                beta1: None,
                beta2: None,
                beta: f64::NAN,
                gamma: f64::NAN,
                regime_i_admissible: false,
                regime_ii_admissible: p > p_0 && p < 1.0,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QCorollary {
    Cor6_4,
    Cor6_5,
}

/// An interval with independently open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn contains(&self, q: f64) -> bool {
        let lo_ok = if self.lo_open { q > self.lo } else { q >= self.lo };
        let hi_ok = if self.hi_open { q < self.hi } else { q <= self.hi };
        lo_ok && hi_ok
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QInterval {
    pub s: f64,
    pub q1: f64,
    pub q2: f64,
    pub admissible_interval: Interval,
}

/// q² - (2-p)/(1-p) q + s m/4
pub fn q_polynomial(p: f64, m: f64, s: f64, q: f64) -> f64 {
    q * q - (2.0 - p) / (1.0 - p) * q + 0.25 * s * m
}

/// p-threshold 1 - 1/(√(s m) - 1) for real q roots.
pub fn q_threshold(m: f64, s: f64) -> f64 {
    1.0 - 1.0 / ((s * m).sqrt() - 1.0)
}

pub fn q_admissible(p: f64, m: f64, s: f64, corollary: QCorollary) -> Result<QInterval, ExponentError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ExponentError::OutOfUnitInterval(p));
    }
    if !(s >= 2.0) {
        return Err(ExponentError::SmallS(s));
    }
    let (q1, q2) = monic_roots((2.0 - p) / (1.0 - p), 0.25 * s * m).ok_or(
        ExponentError::NegativeDiscriminant {
            p,
            threshold: q_threshold(m, s),
        },
    )?;
    let admissible_interval = match corollary {
        QCorollary::Cor6_4 => Interval {
            lo: q1,
            hi: q2,
            lo_open: false,
            hi_open: false,
        },
        QCorollary::Cor6_5 => {
            let top = 1.0 / (1.0 - p);
            let (lo, lo_open) = if q1 > 1.0 { (q1, false) } else { (1.0, true) };
            let (hi, hi_open) = if q2 < top { (q2, false) } else { (top, true) };
            Interval { lo, hi, lo_open, hi_open }
        }
    };
    if admissible_interval.is_empty() {
        return Err(ExponentError::EmptyInterval);
    }
    Ok(QInterval {
        s,
        q1,
        q2,
        admissible_interval,
    })
}
