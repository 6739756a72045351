//! Forcing terms 𝒩(t, x, u) with closed-form partials, and the scaled
//! nonlinearities of the two pressure transforms:
//!
//! * regime I, v = p/(1-p) u^{p-1}: Σ = p u^{p-2} 𝒩,
//!   Σ_v = (2-p) 𝒩/u - 𝒩_u, Σ_x = p u^{p-2} 𝒩_x;
//! * regime II, v = u^{p-1/2}: Σ⋆ = (p-1/2) u^{(2p-3)/2} 𝒩,
//!   Σ⋆_v = (p-3/2) 𝒩/u + 𝒩_u, Σ⋆_x = (p-1/2) u^{(2p-3)/2} 𝒩_x.
//!
//! All formulas are generic over [`Scalar`] so the identity checks can
//! feed jets or grid fields through the same code.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::Scalar;
use crate::Regime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("v = {0} must be positive")]
    NonPositive(f64),
    #[error("p = {p} is outside the range of regime {regime:?}")]
    BadExponent { p: f64, regime: Regime },
    #[error("hypothesis {0:?} needs parameter `{1}`")]
    MissingParameter(HypothesisId, &'static str),
    #[error("invalid sampling range [{lo}, {hi}] with {samples} samples")]
    BadRange { lo: f64, hi: f64, samples: usize },
}

/// Spatial modulation φ(x) = offset + amplitude cos(κ x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub offset: f64,
    pub amplitude: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    #[default]
    Zero,
    /// 𝒩 = c u^a
    Power { c: f64, a: f64 },
    /// 𝒩 = c u (1 - u)
    Logistic { c: f64 },
    /// 𝒩 = φ(x) base(u)
    SpaceModulated {
        base: Box<NonlinearitySpec>,
        modulation: Modulation,
    },
}

impl NonlinearitySpec {
    /// (𝒩, 𝒩_u, 𝒩_x)
    pub fn eval<T: Scalar>(&self, t: &T, x: &T, u: &T) -> (T, T, T) {
        match self {
            NonlinearitySpec::Zero => (u.cst(0.0), u.cst(0.0), u.cst(0.0)),
            NonlinearitySpec::Power { c, a } => (
                u.powf(*a) * *c,
                u.powf(a - 1.0) * (c * a),
                u.cst(0.0),
            ),
            NonlinearitySpec::Logistic { c } => {
                let one_minus = -u.clone() + 1.0;
                (
                    u.clone() * one_minus * *c,
                    (-u.clone() * 2.0 + 1.0) * *c,
                    u.cst(0.0),
                )
            }
            NonlinearitySpec::SpaceModulated { base, modulation } => {
                let (n, nu, nx) = base.eval(t, x, u);
                let arg = x.clone() * modulation.kappa;
                let phi = arg.cos() * modulation.amplitude + modulation.offset;
                let phi_x = -arg.sin() * (modulation.amplitude * modulation.kappa);
                (
                    phi.clone() * n.clone(),
                    phi.clone() * nu,
                    phi_x * n + phi * nx,
                )
            }
        }
    }

    pub fn eval_f64(&self, t: f64, x: f64, u: f64) -> (f64, f64, f64) {
        self.eval(&t, &x, &u)
    }
}

/// u as a function of v for the given regime.
pub fn u_of_v<T: Scalar>(regime: Regime, p: f64, v: &T) -> T {
    match regime {
        Regime::I => (v.clone() * ((1.0 - p) / p)).powf(1.0 / (p - 1.0)),
        Regime::II => v.powf(1.0 / (p - 0.5)),
    }
}

/// v as a function of u for the given regime.
pub fn v_of_u<T: Scalar>(regime: Regime, p: f64, u: &T) -> T {
    match regime {
        Regime::I => u.powf(p - 1.0) * (p / (1.0 - p)),
        Regime::II => u.powf(p - 0.5),
    }
}

/// Σ (regime I) or Σ⋆ (regime II) with its partials (value, d_v, d_x).
pub fn sigma_generic<T: Scalar>(
    spec: &NonlinearitySpec,
    regime: Regime,
    p: f64,
    t: &T,
    x: &T,
    v: &T,
) -> (T, T, T) {
    let u = u_of_v(regime, p, v);
    let (n, nu, nx) = spec.eval(t, x, &u);
    match regime {
        Regime::I => {
            let w = u.powf(p - 2.0) * p;
            (
                w.clone() * n.clone(),
                n / u * (2.0 - p) - nu,
                w * nx,
            )
        }
        Regime::II => {
            let w = u.powf(p - 1.5) * (p - 0.5);
            (
                w.clone() * n.clone(),
                n / u * (p - 1.5) + nu,
                w * nx,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledNonlinearityValues {
    pub value: f64,
    pub d_v: f64,
    pub d_x: f64,
}

fn check_regime(regime: Regime, p: f64) -> Result<(), NonlinearityError> {
    let ok = match regime {
        Regime::I => p > 0.0 && p < 1.0,
        Regime::II => p > 0.5 && p < 1.0,
    };
    if ok {
        Ok(())
    } else {
        Err(NonlinearityError::BadExponent { p, regime })
    }
}

fn sigma_checked(
    spec: &NonlinearitySpec,
    regime: Regime,
    p: f64,
    t: f64,
    x: f64,
    v: f64,
) -> Result<ScaledNonlinearityValues, NonlinearityError> {
    check_regime(regime, p)?;
    if !(v > 0.0) {
        return Err(NonlinearityError::NonPositive(v));
    }
    let (value, d_v, d_x) = sigma_generic(spec, regime, p, &t, &x, &v);
    Ok(ScaledNonlinearityValues { value, d_v, d_x })
}

/// Σ(t, x, v) = p u^{p-2} 𝒩(t, x, u) with u = [(1-p) v/p]^{1/(p-1)}.
#[allow(non_snake_case)]
pub fn sigma_I(
    spec: &NonlinearitySpec,
    p: f64,
    t: f64,
    x: f64,
    v: f64,
) -> Result<ScaledNonlinearityValues, NonlinearityError> {
    sigma_checked(spec, Regime::I, p, t, x, v)
}

/// Σ⋆(t, x, v) = (p - 1/2) u^{(2p-3)/2} 𝒩(t, x, u) with u = v^{1/(p-1/2)}.
#[allow(non_snake_case)]
pub fn sigma_II(
    spec: &NonlinearitySpec,
    p: f64,
    t: f64,
    x: f64,
    v: f64,
) -> Result<ScaledNonlinearityValues, NonlinearityError> {
    sigma_checked(spec, Regime::II, p, t, x, v)
}

/// Γ(v) catalog for the H-functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    #[default]
    Zero,
    /// Γ = c v^e
    Power { c: f64, e: f64 },
}

impl GammaSpec {
    /// (Γ, Γ', Γ'')
    pub fn eval<T: Scalar>(&self, v: &T) -> (T, T, T) {
        match *self {
            GammaSpec::Zero => (v.cst(0.0), v.cst(0.0), v.cst(0.0)),
            GammaSpec::Power { c, e } => (
                v.powf(e) * c,
                v.powf(e - 1.0) * (c * e),
                v.powf(e - 2.0) * (c * e * (e - 1.0)),
            ),
        }
    }
}

/// Every bulleted hypothesis of the Liouville theorems and the maximum
/// principle corollaries. Corollary bullets are stated in the sign
/// convention of the underlying evolution identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisId {
    /// [(2-p) - β(1-p)/2] 𝒩/u - 𝒩_u ≥ 0
    Thm2_4,
    /// 𝒩 ≥ a > 0 (non-existence part of both Liouville theorems)
    Thm2_4Positive,
    /// (3-2p) 𝒩/u - 2 𝒩_u ≥ 0
    Thm7_4,
    Thm7_4Positive,
    /// Γ'(v) Σ ≥ 0
    Cor6_4GammaSigma,
    /// ⟨∇v, Σ_x⟩ ≥ 0 for every direction, i.e. Σ_x = 0
    Cor6_4SigmaX,
    /// (q/s) Σ/v - Σ_v ≤ a
    Cor6_4Growth,
    /// [2q(1-p) - 1] Γ' + (1-p) v Γ'' ≥ 0
    Cor6_4GammaConvex,
    /// Σ ≤ 0
    Cor6_5SigmaSign,
    Cor6_5SigmaX,
    /// 2 Σ_v - q Σ/v ≥ 0
    Cor6_5Growth,
    /// Σ⋆_v ≤ a
    Cor11_3Growth,
    /// Γ'(v) Σ⋆ ≤ 0
    Cor11_3GammaSigma,
    /// Γ' + v Γ'' ≥ 0
    Cor11_3GammaConvex,
    /// ⟨∇v, Σ⋆_x⟩ ≤ 0 for every direction, i.e. Σ⋆_x = 0
    Cor11_3SigmaX,
    /// Σ⋆ ≤ 0
    Cor11_4SigmaSign,
    /// Σ⋆_v ≤ 0
    Cor11_4SigmaV,
    Cor11_4SigmaX,
}

impl HypothesisId {
    pub const ALL: [HypothesisId; 18] = [
        HypothesisId::Thm2_4,
        HypothesisId::Thm2_4Positive,
        HypothesisId::Thm7_4,
        HypothesisId::Thm7_4Positive,
        HypothesisId::Cor6_4GammaSigma,
        HypothesisId::Cor6_4SigmaX,
        HypothesisId::Cor6_4Growth,
        HypothesisId::Cor6_4GammaConvex,
        HypothesisId::Cor6_5SigmaSign,
        HypothesisId::Cor6_5SigmaX,
        HypothesisId::Cor6_5Growth,
        HypothesisId::Cor11_3Growth,
        HypothesisId::Cor11_3GammaSigma,
        HypothesisId::Cor11_3GammaConvex,
        HypothesisId::Cor11_3SigmaX,
        HypothesisId::Cor11_4SigmaSign,
        HypothesisId::Cor11_4SigmaV,
        HypothesisId::Cor11_4SigmaX,
    ];

    pub fn statement(&self) -> &'static str {
        match self {
            HypothesisId::Thm2_4 => "[(2-p) - beta(1-p)/2] N(u)/u - N_u(u) >= 0",
            HypothesisId::Thm2_4Positive | HypothesisId::Thm7_4Positive => "N(u) >= a > 0",
            HypothesisId::Thm7_4 => "(3-2p) N(u)/u - 2 N_u(u) >= 0",
            HypothesisId::Cor6_4GammaSigma => "Gamma'(v) Sigma(t,x,v) >= 0",
            HypothesisId::Cor6_4SigmaX | HypothesisId::Cor6_5SigmaX => {
                "<grad v, Sigma_x(t,x,v)> >= 0"
            }
            HypothesisId::Cor6_4Growth => "(q/s) Sigma(t,x,v)/v - Sigma_v(t,x,v) <= a",
            HypothesisId::Cor6_4GammaConvex => "[2q(1-p)-1] Gamma'(v) + (1-p) v Gamma''(v) >= 0",
            HypothesisId::Cor6_5SigmaSign => "Sigma(t,x,v) <= 0",
            HypothesisId::Cor6_5Growth => "2 Sigma_v(t,x,v) - q Sigma(t,x,v)/v >= 0",
            HypothesisId::Cor11_3Growth => "Sigma*_v(t,x,v) <= a",
            HypothesisId::Cor11_3GammaSigma => "Gamma'(v) Sigma*(t,x,v) <= 0",
            HypothesisId::Cor11_3GammaConvex => "Gamma'(v) + v Gamma''(v) >= 0",
            HypothesisId::Cor11_3SigmaX | HypothesisId::Cor11_4SigmaX => {
                "<grad v, Sigma*_x(t,x,v)> <= 0"
            }
            HypothesisId::Cor11_4SigmaSign => "Sigma*(t,x,v) <= 0",
            HypothesisId::Cor11_4SigmaV => "Sigma*_v(t,x,v) <= 0",
        }
    }

    pub fn regime(&self) -> Regime {
        use HypothesisId::*;
        match self {
            Thm2_4 | Thm2_4Positive | Cor6_4GammaSigma | Cor6_4SigmaX | Cor6_4Growth
            | Cor6_4GammaConvex | Cor6_5SigmaSign | Cor6_5SigmaX | Cor6_5Growth => Regime::I,
            _ => Regime::II,
        }
    }
}

/// Parameters consumed by the hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisParams {
    pub p: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub gamma: GammaSpec,
    #[serde(default)]
    pub t: f64,
    /// Positions at which x-dependent nonlinearities are sampled.
    #[serde(default = "default_xs")]
    pub xs: Vec<f64>,
}

fn default_xs() -> Vec<f64> {
    vec![0.0]
}

impl HypothesisParams {
    pub fn new(p: f64) -> Self {
        HypothesisParams {
            p,
            beta: None,
            s: None,
            q: None,
            a: None,
            gamma: GammaSpec::Zero,
            t: 0.0,
            xs: default_xs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPoint {
    pub u: f64,
    pub x: f64,
    /// Signed amount by which the hypothesis fails (positive = violated).
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub hypothesis: HypothesisId,
    pub statement: String,
    pub holds: bool,
    pub worst_point: WorstPoint,
    pub samples: usize,
}

/// Zero-tolerance band for sign hypotheses; absorbs rounding only.
pub const HYPOTHESIS_TOL: f64 = 1e-14;

/// Violation (positive = fails) of one hypothesis at one (x, u).
pub fn hypothesis_violation(
    spec: &NonlinearitySpec,
    id: HypothesisId,
    params: &HypothesisParams,
    x: f64,
    u: f64,
) -> Result<f64, NonlinearityError> {
    let p = params.p;
    let t = params.t;
    let need = |o: Option<f64>, name| o.ok_or(NonlinearityError::MissingParameter(id, name));
    let (n, nu, _) = spec.eval_f64(t, x, u);
    let regime = id.regime();
    let v = v_of_u(regime, p, &u);
    let (sig, sig_v, sig_x) = sigma_generic(spec, regime, p, &t, &x, &v);
    let (_, g1, g2) = params.gamma.eval(&v);
    use HypothesisId::*;
    Ok(match id {
        Thm2_4 => {
            let beta = need(params.beta, "beta")?;
            -(((2.0 - p) - beta * (1.0 - p) / 2.0) * n / u - nu)
        }
        Thm7_4 => -((3.0 - 2.0 * p) * n / u - 2.0 * nu),
        Thm2_4Positive | Thm7_4Positive => {
            let a = need(params.a, "a")?;
            if a <= 0.0 {
                return Err(NonlinearityError::MissingParameter(id, "a > 0"));
            }
            a - n
        }
        Cor6_4GammaSigma => -(g1 * sig),
        Cor6_4SigmaX | Cor6_5SigmaX | Cor11_3SigmaX | Cor11_4SigmaX => sig_x.abs(),
        Cor6_4Growth => {
            let (q, s, a) = (need(params.q, "q")?, need(params.s, "s")?, need(params.a, "a")?);
            (q / s) * sig / v - sig_v - a
        }
        Cor6_4GammaConvex => {
            let q = need(params.q, "q")?;
            -((2.0 * q * (1.0 - p) - 1.0) * g1 + (1.0 - p) * v * g2)
        }
        Cor6_5SigmaSign => sig,
        Cor6_5Growth => {
            let q = need(params.q, "q")?;
            -(2.0 * sig_v - q * sig / v)
        }
        Cor11_3Growth => sig_v - need(params.a, "a")?,
        Cor11_3GammaSigma => g1 * sig,
        Cor11_3GammaConvex => -(g1 + v * g2),
        Cor11_4SigmaSign => sig,
        Cor11_4SigmaV => sig_v,
    })
}

/// Log-spaced samples of [lo, hi].
pub fn log_samples(lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>, NonlinearityError> {
    if !(lo > 0.0 && hi >= lo) || samples == 0 {
        return Err(NonlinearityError::BadRange { lo, hi, samples });
    }
    if samples == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..samples)
        .map(|i| (a + (b - a) * i as f64 / (samples - 1) as f64).exp())
        .collect())
}

/// Evaluate a hypothesis on a log-spaced u-sample (and the positions in
/// `params.xs`) and report the most violating point.
pub fn condition_check(
    spec: &NonlinearitySpec,
    hypothesis: HypothesisId,
    params: &HypothesisParams,
    u_range: (f64, f64),
    samples: usize,
) -> Result<ConditionReport, NonlinearityError> {
    let us = log_samples(u_range.0, u_range.1, samples)?;
    let mut worst = WorstPoint {
        u: us[0],
        x: params.xs.first().copied().unwrap_or(0.0),
        violation: f64::NEG_INFINITY,
    };
    for &x in &params.xs {
        for &u in &us {
            let viol = hypothesis_violation(spec, hypothesis, params, x, u)?;
            if viol > worst.violation || viol.is_nan() {
                worst = WorstPoint { u, x, violation: viol };
                if viol.is_nan() {
                    break;
                }
            }
        }
    }
    let holds = worst.violation <= HYPOTHESIS_TOL;
    Ok(ConditionReport {
        hypothesis,
        statement: hypothesis.statement().to_string(),
        holds,
        worst_point: worst,
        samples: us.len() * params.xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog() -> Vec<NonlinearitySpec> {
        vec![
            NonlinearitySpec::Zero,
            NonlinearitySpec::Power { c: 0.7, a: 1.5 },
            NonlinearitySpec::Power { c: -0.3, a: 0.5 },
            NonlinearitySpec::Logistic { c: 0.4 },
            NonlinearitySpec::SpaceModulated {
                base: Box::new(NonlinearitySpec::Power { c: 0.5, a: 2.0 }),
                modulation: Modulation { offset: 1.0, amplitude: 0.3, kappa: 2.0 },
            },
        ]
    }

    #[test]
    fn zero_gives_zero() {
        let s = sigma_I(&NonlinearitySpec::Zero, 0.6, 0.0, 0.0, 2.0).unwrap();
        assert_eq!((s.value, s.d_v, s.d_x), (0.0, 0.0, 0.0));
        let s = sigma_II(&NonlinearitySpec::Zero, 0.6, 0.0, 0.0, 2.0).unwrap();
        assert_eq!((s.value, s.d_v, s.d_x), (0.0, 0.0, 0.0));
    }

    #[test]
    fn linear_forcing_examples() {
        let lin = NonlinearitySpec::Power { c: 1.0, a: 1.0 };
        for p in [0.3, 0.6, 0.75] {
            let v = 1.7;
            let s = sigma_I(&lin, p, 0.0, 0.0, v).unwrap();
            assert!((s.value - (1.0 - p) * v).abs() < 1e-12);
            assert!((s.d_v - (1.0 - p)).abs() < 1e-12);
        }
        let s = sigma_II(&lin, 0.75, 0.0, 0.0, 1.7).unwrap();
        assert!((s.value - 0.25 * 1.7).abs() < 1e-12);
        assert!((s.d_v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exponent_ranges_are_enforced() {
        let lin = NonlinearitySpec::Power { c: 1.0, a: 1.0 };
        assert!(sigma_II(&lin, 0.5, 0.0, 0.0, 1.0).is_err());
        assert!(sigma_I(&lin, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(sigma_I(&lin, 0.5, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn regime_ii_liouville_hypothesis_examples() {
        let params = HypothesisParams::new(0.8);
        let lin = NonlinearitySpec::Power { c: 1.0, a: 1.0 };
        let r = condition_check(&lin, HypothesisId::Thm7_4, &params, (1e-3, 1e3), 256).unwrap();
        assert!(!r.holds);
        assert!((r.worst_point.violation - (2.0 * 0.8 - 1.0)).abs() < 1e-12);

        let params = HypothesisParams::new(0.75);
        let pow = NonlinearitySpec::Power { c: 1.0, a: 1.5 };
        assert!(!condition_check(&pow, HypothesisId::Thm7_4, &params, (1e-3, 1e3), 256).unwrap().holds);
        let cst = NonlinearitySpec::Power { c: 2.0, a: 0.0 };
        assert!(condition_check(&cst, HypothesisId::Thm7_4, &params, (1e-3, 1e3), 256).unwrap().holds);
    }

    #[test]
    fn zero_forcing_satisfies_everything_with_nonnegative_a() {
        let mut params = HypothesisParams::new(0.75);
        params.beta = Some(0.8);
        params.q = Some(1.5);
        params.s = Some(2.0);
        params.a = Some(0.0);
        for id in HypothesisId::ALL {
            if matches!(id, HypothesisId::Thm2_4Positive | HypothesisId::Thm7_4Positive) {
                continue;
            }
            let r = condition_check(&NonlinearitySpec::Zero, id, &params, (1e-3, 1e3), 64).unwrap();
            assert!(r.holds, "{id:?}");
        }
    }

    #[test]
    fn missing_parameter_is_reported() {
        let params = HypothesisParams::new(0.75);
        let r = condition_check(&NonlinearitySpec::Zero, HypothesisId::Thm2_4, &params, (1.0, 2.0), 4);
        assert!(matches!(r, Err(NonlinearityError::MissingParameter(_, "beta"))));
    }

    #[test]
    fn partials_match_finite_differences() {
        for spec in catalog() {
            for regime in [Regime::I, Regime::II] {
                let p = 0.7;
                for &(x, v) in &[(0.3, 0.8), (-1.1, 2.5), (2.0, 1.3)] {
                    let (s, sv, sx) = sigma_generic(&spec, regime, p, &0.1, &x, &v);
                    let h = 1e-5 * v;
                    let fv = |vv: f64| sigma_generic(&spec, regime, p, &0.1, &x, &vv).0;
                    let fdv = (fv(v + h) - fv(v - h)) / (2.0 * h);
                    let hx = 1e-5;
                    let fx = |xx: f64| sigma_generic(&spec, regime, p, &0.1, &xx, &v).0;
                    let fdx = (fx(x + hx) - fx(x - hx)) / (2.0 * hx);
                    let scale = 1.0 + s.abs() + sv.abs();
                    assert!((sv - fdv).abs() <= 1e-6 * scale, "{spec:?} {regime:?}");
                    assert!((sx - fdx).abs() <= 1e-6 * (1.0 + sx.abs()), "{spec:?} {regime:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn v_form_matches_u_form(p in 0.05f64..0.95, u in 0.05f64..20.0, c in -2.0f64..2.0, a in -1.0f64..3.0) {
            let spec = NonlinearitySpec::Power { c, a };
            let v = p / (1.0 - p) * u.powf(p - 1.0);
            let s = sigma_I(&spec, p, 0.0, 0.0, v).unwrap().value;
            let direct = p * u.powf(p - 2.0) * c * u.powf(a);
            prop_assert!((s - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
            let back = u_of_v(Regime::I, p, &v);
            prop_assert!((back - u).abs() <= 1e-12 * u);
        }

        #[test]
        fn section_formula_for_sigma_v(p in 0.05f64..0.95, u in 0.05f64..20.0, c in -2.0f64..2.0) {
            let spec = NonlinearitySpec::Logistic { c };
            let v = v_of_u(Regime::I, p, &u);
            let s = sigma_I(&spec, p, 0.0, 0.0, v).unwrap();
            let (n, nu, _) = spec.eval_f64(0.0, 0.0, u);
            prop_assert!((s.d_v - ((2.0 - p) * n / u - nu)).abs() <= 1e-10 * (1.0 + nu.abs() + (n / u).abs()));
        }

        #[test]
        fn more_samples_never_hide_a_failure(n1 in 2usize..64, extra in 1usize..64, c in -1.0f64..1.0, a in 0.0f64..3.0) {
            let spec = NonlinearitySpec::Power { c, a };
            let params = HypothesisParams::new(0.75);
            let r1 = condition_check(&spec, HypothesisId::Thm7_4, &params, (1e-2, 1e2), n1).unwrap();
            // Refining by an integer factor keeps every old sample.
            let n2 = (n1 - 1) * (extra + 1) + 1;
            let r2 = condition_check(&spec, HypothesisId::Thm7_4, &params, (1e-2, 1e2), n2).unwrap();
            prop_assert!(r1.holds || !r2.holds);
        }
    }
}
