//! Numerical counterparts of the gradient estimates: the localisation
//! cutoff, the local/global/static bounds of both regimes with an
//! empirically calibrated constant, the maximum-principle corollaries on
//! closed manifolds, and the Liouville mechanisms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{Jet, Scalar};
use crate::exponents::{self, BetaPolicy, ExponentError, QCorollary};
use crate::fd;
use crate::geometry::{curvature_bounds_on, superflow_margin, Cylinder, GeometryError, GeometrySpec, Potential};
use crate::nonlinearity::{
    condition_check, sigma_generic, ConditionReport, GammaSpec, HypothesisId, HypothesisParams, NonlinearityError,
    NonlinearitySpec,
};
use crate::solver::{pressure_transform, refined_nx, solve, FieldKind, ScenarioSpec, SolverError, SpaceTimeField};
use crate::Regime;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error("hypothesis fails: {statement} (violation {violation:e})")]
    Hypothesis { statement: String, violation: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, EstimateError> {
    Err(EstimateError::Invalid(msg.into()))
}

// ---------------------------------------------------------------------------
// Cutoff

/// Values of η̄ and its partial derivatives at one (ϱ, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffValues {
    pub eta: f64,
    pub d_rho: f64,
    pub d_rhorho: f64,
    pub d_t: f64,
}

/// η̄(ϱ, t) = ψ(ϱ) θ(t) with ψ = φ^κ, φ a flat-ended smooth ramp from 1 on
/// [0, R/2] to 0 at R, and θ = ξ² for the linear ramp ξ from 0 at t₀ - T
/// to 1 at τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffFunction {
    pub cylinder: Cylinder,
    pub tau: f64,
    pub a: f64,
    pub kappa: u32,
}

/// Standard smooth step on [0, 1] with all derivatives vanishing at the
/// ends; returns (S, S', S'').
fn smooth_step(y: f64) -> (f64, f64, f64) {
    // exp(-1/y) is below 1e-217 for y < 0.002, so the step is flat there.
    if y <= 0.002 {
        return (0.0, 0.0, 0.0);
    }
    if y >= 0.998 {
        return (1.0, 0.0, 0.0);
    }
    let yj = Jet::x_var(y);
    let g0 = (Jet::constant(-1.0) / yj).exp();
    let g1 = (Jet::constant(-1.0) / (-yj + 1.0)).exp();
    let s = g0 / (g0 + g1);
    (s.value(), s.deriv_x(1), s.deriv_x(2))
}

pub fn build_cutoff(cylinder: Cylinder, tau: f64, a: f64) -> Result<CutoffFunction, EstimateError> {
    let start = cylinder.t0 - cylinder.t_depth;
    if !(cylinder.r > 0.0 && cylinder.t_depth > 0.0) {
        return invalid("cylinder needs R > 0 and T > 0");
    }
    if !(tau > start && tau <= cylinder.t0) {
        return invalid(format!("tau = {tau} outside (t0 - T, t0] = ({start}, {}]", cylinder.t0));
    }
    if !(a > 0.0 && a < 1.0) {
        return invalid(format!("a = {a} outside (0, 1)"));
    }
    let kappa = ((1.0 / (1.0 - a)).ceil() as u32).max(2);
    Ok(CutoffFunction { cylinder, tau, a, kappa })
}

impl CutoffFunction {
    pub fn eval(&self, rho: f64, t: f64) -> CutoffValues {
        let r = self.cylinder.r;
        let start = self.cylinder.t0 - self.cylinder.t_depth;
        let span = self.tau - start;
        let xi = ((t - start) / span).clamp(0.0, 1.0);
        let dxi = if t > start && t < self.tau { 1.0 / span } else { 0.0 };
        let theta = xi * xi;
        let dtheta = 2.0 * xi * dxi;

        let y = 2.0 * (r - rho) / r;
        let (s, s1, s2) = smooth_step(y);
        let (phi, dphi, ddphi) = (s, -2.0 / r * s1, 4.0 / (r * r) * s2);
        let k = self.kappa as i32;
        let kf = k as f64;
        let psi = phi.powi(k);
        let dpsi = kf * phi.powi(k - 1) * dphi;
        let ddpsi = kf * (kf - 1.0) * phi.powi(k - 2) * dphi * dphi + kf * phi.powi(k - 1) * ddphi;
        CutoffValues {
            eta: psi * theta,
            d_rho: dpsi * theta,
            d_rhorho: ddpsi * theta,
            d_t: psi * dtheta,
        }
    }

    /// Check the four cutoff properties on an n × n sample of
    /// [0, 1.25 R] × [t₀ - T, t₀] and report the achieved constants.
    pub fn verify(&self, n: usize) -> CutoffCheck {
        let r = self.cylinder.r;
        let start = self.cylinder.t0 - self.cylinder.t_depth;
        let span = self.tau - start;
        let n = n.max(2);
        let mut range_ok = true;
        let mut plateau_ok = true;
        let mut time_ok = true;
        let mut rho_ok = true;
        let mut c = 0.0f64;
        let mut c_a = 0.0f64;
        for i in 0..n {
            let rho = 1.25 * r * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let t = start + self.cylinder.t_depth * j as f64 / (n - 1) as f64;
                let cv = self.eval(rho, t);
                if !(0.0..=1.0).contains(&cv.eta) || (rho >= r && cv.eta != 0.0) {
                    range_ok = false;
                }
                if rho <= r / 2.0 && t >= self.tau && (cv.eta - 1.0).abs() > 1e-15 {
                    plateau_ok = false;
                }
                if j == 0 && cv.eta != 0.0 {
                    time_ok = false;
                }
                if cv.d_rho > 0.0 {
                    rho_ok = false;
                }
                if cv.eta > 0.0 {
                    c = c.max(cv.d_t.abs() / cv.eta.sqrt() * span);
                    let ea = cv.eta.powf(self.a);
                    c_a = c_a.max(cv.d_rho.abs() * r / ea).max(cv.d_rhorho.abs() * r * r / ea);
                } else if cv.d_rho != 0.0 || cv.d_rhorho != 0.0 || cv.d_t != 0.0 {
                    rho_ok = false;
                }
            }
        }
        if !(c <= 2.0 + 1e-9) {
            time_ok = false;
        }
        if !c_a.is_finite() {
            rho_ok = false;
        }
        CutoffCheck {
            samples: n,
            kappa: self.kappa,
            support_and_range: range_ok,
            plateau: plateau_ok,
            time_derivative: time_ok,
            rho_derivatives: rho_ok,
            c,
            c_a,
            pass: range_ok && plateau_ok && time_ok && rho_ok,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffCheck {
    pub samples: usize,
    pub kappa: u32,
    pub support_and_range: bool,
    pub plateau: bool,
    pub time_derivative: bool,
    pub rho_derivatives: bool,
    /// max |∂tη̄|/√η̄ · (τ - t₀ + T)
    pub c: f64,
    /// max of |∂ϱη̄| R/η̄^a and |∂ϱϱη̄| R²/η̄^a
    pub c_a: f64,
    pub pass: bool,
}

// ---------------------------------------------------------------------------
// Gradient estimates

#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateId {
    I_local,
    I_global,
    I_static,
    II_local,
    II_global,
    II_static,
}

impl EstimateId {
    pub const ALL: [EstimateId; 6] = [
        EstimateId::I_local,
        EstimateId::I_global,
        EstimateId::I_static,
        EstimateId::II_local,
        EstimateId::II_global,
        EstimateId::II_static,
    ];

    pub fn regime(self) -> Regime {
        match self {
            EstimateId::I_local | EstimateId::I_global | EstimateId::I_static => Regime::I,
            _ => Regime::II,
        }
    }

    pub fn is_global(self) -> bool {
        matches!(self, EstimateId::I_global | EstimateId::II_global)
    }

    pub fn is_static(self) -> bool {
        matches!(self, EstimateId::I_static | EstimateId::II_static)
    }

    pub fn parse(name: &str) -> Option<EstimateId> {
        EstimateId::ALL.into_iter().find(|id| format!("{id:?}").eq_ignore_ascii_case(name))
    }
}

fn potential_is_static(pot: &Potential) -> bool {
    match pot {
        Potential::TimeScaled { base, rate } => *rate == 0.0 && potential_is_static(base),
        _ => true,
    }
}

/// Left side and bracket at one evaluated node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEval {
    pub x: f64,
    pub t: f64,
    pub lhs: f64,
    pub bracket: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateLevel {
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub M: f64,
    pub k: f64,
    pub h: f64,
    pub beta: Option<f64>,
    /// Sup terms of the nonlinearity (gradient-in-x and growth parts).
    pub sigma_x_term: f64,
    pub sigma_growth_term: f64,
    pub ratio_max: f64,
    pub worst: Option<NodeEval>,
    pub nodes: usize,
    pub degenerate_nodes: usize,
}

/// Evaluate an estimate on a field of u: LHS and bracket at every node of
/// the verification region, and the calibrated ratio.
pub fn estimate_nodes(
    id: EstimateId,
    field: &SpaceTimeField,
    geom: &GeometrySpec,
    nonlin: &NonlinearitySpec,
    p: f64,
    beta: BetaPolicy,
    cyl: &Cylinder,
) -> Result<(EstimateLevel, Vec<NodeEval>), EstimateError> {
    let regime = id.regime();
    let m = geom.m;
    let beta = match regime {
        Regime::I => Some(exponents::beta_selection(p, m, beta)?.beta),
        Regime::II => {
            if !exponents::regime_ii_admissible(p, m) {
                let (_, p0) = exponents::critical_exponents(m)?;
                return invalid(format!("p = {p} outside the regime-II window ({p0}, 1)"));
            }
            None
        }
    };
    if id.is_global() && !geom.periodic() {
        return invalid("global estimates are checked on closed geometries only");
    }
    if id.is_static() && !(geom.lambda.is_static() && potential_is_static(&geom.potential)) {
        return invalid("static estimates need a time-independent metric and potential");
    }
    if field.kind != FieldKind::U {
        return invalid("expected a field of u");
    }
    let v = pressure_transform(field, p, regime)?;
    let (nt, nx) = (v.nt(), v.nx());
    let start = cyl.t0 - cyl.t_depth;
    let in_q = |it: usize, ix: usize| {
        let t = v.times[it];
        if id.is_global() {
            t >= start - 1e-12 && t <= cyl.t0 + 1e-12
        } else {
            cyl.contains(geom, v.nodes[ix], t)
        }
    };
    let half = cyl.half();
    let in_eval = |it: usize, ix: usize| {
        let t = v.times[it];
        t > start + 1e-12 * (1.0 + cyl.t_depth)
            && if id.is_global() {
                t <= cyl.t0 + 1e-12
            } else {
                half.contains(geom, v.nodes[ix], t)
            }
    };

    // Sup terms over Q_{R,T}.
    let mut m_sup = f64::NEG_INFINITY;
    let mut s_x = 0.0f64;
    let mut s_g = 0.0f64;
    let mut q_nodes = Vec::new();
    let mut q_times = Vec::new();
    for it in 0..nt {
        let t = v.times[it];
        let mut hit = false;
        for ix in 0..nx {
            if !in_q(it, ix) {
                continue;
            }
            hit = true;
            let (x, vv) = (v.nodes[ix], v.at(it, ix));
            m_sup = m_sup.max(vv);
            let (sg, sv, sx) = sigma_generic(nonlin, regime, p, &t, &x, &vv);
            match regime {
                Regime::I => {
                    let b = beta.unwrap_or(f64::NAN);
                    s_x = s_x.max((sx.abs() / vv.powf((3.0 * b - 2.0) / 2.0)).cbrt());
                    s_g = s_g.max(vv.powf((1.0 - b) / 2.0) * (b * sg / vv - 2.0 * sv).max(0.0).sqrt());
                }
                Regime::II => {
                    s_x = s_x.max(vv.powf(2.0 * p / (3.0 * (2.0 * p - 1.0))) * sx.abs().cbrt());
                    s_g = s_g.max(vv.powf(p / (2.0 * p - 1.0)) * sv.max(0.0).sqrt());
                }
            }
            if !q_nodes.contains(&x) {
                q_nodes.push(x);
            }
        }
        if hit {
            q_times.push(t);
        }
    }
    if q_times.is_empty() {
        return invalid("the cylinder contains no grid nodes");
    }
    let curv = curvature_bounds_on(geom, None, &q_nodes, &q_times)?;
    let (k, h) = (curv.k, if id.is_static() { 0.0 } else { curv.h });
    let r = cyl.r;
    let local = (k.powf(0.25) / r.sqrt() + 1.0 / r + k.sqrt()) * 1.0;

    let mut evals = Vec::new();
    let mut degenerate = 0;
    let mut ratio_max = 0.0f64;
    let mut worst = None;
    for it in 0..nt {
        let t = v.times[it];
        let row = v.slice(it);
        let grad = fd::d1(row, v.dx(), v.periodic());
        let ge = geom.g_inv(t).sqrt();
        let tw = 1.0 / (t - start).sqrt();
        for ix in 0..nx {
            if !in_eval(it, ix) {
                continue;
            }
            let vv = row[ix];
            let gnorm = ge * grad[ix].abs();
            let (lhs, bracket) = match (regime, id) {
                (Regime::I, _) => {
                    let b = beta.unwrap_or(f64::NAN);
                    let m1 = m_sup.powf(1.0 - b / 2.0);
                    let m2 = m_sup.powf((1.0 - b) / 2.0);
                    let lhs = gnorm / vv.powf(b / 2.0);
                    let bracket = match id {
                        EstimateId::I_local => h.sqrt() * m2 + local * m1 + m2 * tw + s_x + s_g,
                        EstimateId::I_global => k.sqrt() * m1 + (h.sqrt() + tw) * m2 + s_x + s_g,
                        _ => local * m1 + m2 * tw + s_x + s_g,
                    };
                    (lhs, bracket)
                }
                (Regime::II, _) => {
                    let mp = m_sup.powf(p / (2.0 * p - 1.0));
                    let bracket = match id {
                        EstimateId::II_local => h.sqrt() * mp + local * m_sup + s_x + mp * tw + s_g,
                        EstimateId::II_global => (h.sqrt() + tw) * mp + k.sqrt() * m_sup + s_g + s_x,
                        _ => mp * tw + s_x + local * m_sup + s_g,
                    };
                    (gnorm, bracket)
                }
            };
            let node = NodeEval { x: v.nodes[ix], t, lhs, bracket };
            if bracket > 0.0 && bracket.is_finite() {
                let ratio = lhs / bracket;
                if ratio > ratio_max || worst.is_none() {
                    ratio_max = ratio_max.max(ratio);
                    worst = Some(node);
                }
            } else {
                degenerate += 1;
            }
            evals.push(node);
        }
    }
    if evals.is_empty() {
        return invalid("no grid nodes in the verification region");
    }
    Ok((
        EstimateLevel {
            nx,
            dx: v.dx(),
            dt: v.dt(),
            M: m_sup,
            k,
            h,
            beta,
            sigma_x_term: s_x,
            sigma_growth_term: s_g,
            ratio_max,
            worst,
            nodes: evals.len(),
            degenerate_nodes: degenerate,
        },
        evals,
    ))
}

pub fn verify_estimate(
    id: EstimateId,
    field: &SpaceTimeField,
    geom: &GeometrySpec,
    nonlin: &NonlinearitySpec,
    p: f64,
    beta: BetaPolicy,
    cyl: &Cylinder,
) -> Result<EstimateLevel, EstimateError> {
    estimate_nodes(id, field, geom, nonlin, p, beta, cyl).map(|(l, _)| l)
}

/// Allowed relative spread of C* across refinement levels.
pub const CSTAR_STABILITY: f64 = 0.25;

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub id: EstimateId,
    pub M: f64,
    pub k: f64,
    pub h: f64,
    pub kappa: Option<f64>,
    pub ratio_max: f64,
    pub C_star: f64,
    /// max C* / min C* - 1 across levels.
    pub spread: f64,
    pub c_budget: Option<f64>,
    pub per_level: Vec<EstimateLevel>,
    pub pass: bool,
}

/// Run an estimate on `levels` refinements of a scenario. C* is the
/// finest-level ratio; the check passes if C* is finite, its spread across
/// levels is below [`CSTAR_STABILITY`], and it respects the budget if one
/// is configured.
pub fn estimate_study(
    id: EstimateId,
    scn: &ScenarioSpec,
    beta: BetaPolicy,
    cyl: &Cylinder,
    levels: usize,
    c_budget: Option<f64>,
) -> Result<EstimateReport, EstimateError> {
    if levels == 0 {
        return invalid("levels must be at least 1");
    }
    let per_level = (0..levels)
        .map(|l| {
            let s = ScenarioSpec {
                nx: refined_nx(&scn.geometry.domain, scn.nx, l),
                dt: None,
                ..scn.clone()
            };
            let u = solve(&s)?;
            verify_estimate(id, &u, &s.geometry, &s.nonlinearity, s.p, beta, cyl)
        })
        .collect::<Result<Vec<_>, EstimateError>>()?;
    let last = per_level.last().expect("at least one level");
    let cmax = per_level.iter().map(|l| l.ratio_max).fold(f64::NEG_INFINITY, f64::max);
    let cmin = per_level.iter().map(|l| l.ratio_max).fold(f64::INFINITY, f64::min);
    let spread = if cmax == 0.0 { 0.0 } else { cmax / cmin - 1.0 };
    let c_star = last.ratio_max;
    let kappa = superflow_margin(&scn.geometry, &solve(&ScenarioSpec { nx: scn.nx, dt: None, ..scn.clone() })?, id.regime(), scn.p)
        .ok()
        .and_then(|b| b.kappa_super);
    let pass = c_star.is_finite()
        && spread < CSTAR_STABILITY
        && c_budget.map_or(true, |b| c_star <= b);
    Ok(EstimateReport {
        id,
        M: last.M,
        k: last.k,
        h: last.h,
        kappa,
        ratio_max: c_star,
        C_star: c_star,
        spread,
        c_budget,
        per_level,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Maximum-principle corollaries

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorollaryId {
    Cor6_4,
    Cor6_5,
    Cor11_3,
    Cor11_4,
}

impl CorollaryId {
    pub const ALL: [CorollaryId; 4] = [CorollaryId::Cor6_4, CorollaryId::Cor6_5, CorollaryId::Cor11_3, CorollaryId::Cor11_4];

    pub fn regime(self) -> Regime {
        match self {
            CorollaryId::Cor6_4 | CorollaryId::Cor6_5 => Regime::I,
            _ => Regime::II,
        }
    }

    pub fn hypotheses(self) -> &'static [HypothesisId] {
        use HypothesisId::*;
        match self {
            CorollaryId::Cor6_4 => &[Cor6_4GammaSigma, Cor6_4SigmaX, Cor6_4Growth, Cor6_4GammaConvex],
            CorollaryId::Cor6_5 => &[Cor6_5SigmaSign, Cor6_5SigmaX, Cor6_5Growth],
            CorollaryId::Cor11_3 => &[Cor11_3Growth, Cor11_3GammaSigma, Cor11_3GammaConvex, Cor11_3SigmaX],
            CorollaryId::Cor11_4 => &[Cor11_4SigmaSign, Cor11_4SigmaV, Cor11_4SigmaX],
        }
    }

    pub fn parse(name: &str) -> Option<CorollaryId> {
        CorollaryId::ALL.into_iter().find(|id| format!("{id:?}").eq_ignore_ascii_case(name))
    }
}

/// (2p - 1)²/(8p³)
pub fn cor11_4_prefactor(p: f64) -> f64 {
    (2.0 * p - 1.0).powi(2) / (8.0 * p.powi(3))
}

/// 1/((1 - q)[(1 - p) q - 1])
pub fn cor6_5_prefactor(p: f64, q: f64) -> f64 {
    1.0 / ((1.0 - q) * ((1.0 - p) * q - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MaxPrincipleParams {
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    /// Growth constant; the smallest admissible value when absent.
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub gamma: GammaSpec,
    /// Super-flow constant; the minimal one for the solved field when absent.
    #[serde(default)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub id: CorollaryId,
    pub p: f64,
    pub m: f64,
    pub s: Option<f64>,
    pub q: Option<f64>,
    pub a: Option<f64>,
    pub kappa: f64,
    pub gamma: GammaSpec,
    pub prefactor: Option<f64>,
    pub hypotheses: Vec<ConditionReport>,
    /// Worst value of the ⟨∇v, Σ_x⟩ sign bullet on the solved field.
    pub field_sigma_x_violation: f64,
    /// max over nodes of LHS - RHS.
    pub worst_margin: f64,
    pub worst_x: f64,
    pub worst_t: f64,
    /// max LHS/RHS over nodes with RHS > 0.
    pub max_ratio: f64,
    pub max_rhs: f64,
    pub tolerance: f64,
    pub nodes: usize,
    pub pass: bool,
}

/// Right side e^{s(k+a)τ} (max H(0) - Γ(v)) shared by the two
/// exponential-growth corollaries.
pub fn growth_rhs(s: f64, kappa: f64, a: f64, tau: f64, initial_max: f64, gamma_v: f64) -> f64 {
    (s * (kappa + a) * tau).exp() * (initial_max - gamma_v)
}

/// Absolute part of the corollary tolerance.
pub const MAX_PRINCIPLE_ABS_TOL: f64 = 1e-6;

/// Evaluate a corollary's display at every node and stored time of a
/// solved closed-manifold scenario.
pub fn max_principle_check(
    id: CorollaryId,
    scn: &ScenarioSpec,
    params: &MaxPrincipleParams,
) -> Result<MaxPrincipleReport, EstimateError> {
    let geom = &scn.geometry;
    let p = scn.p;
    let m = geom.m;
    if !geom.periodic() {
        return invalid("maximum-principle corollaries need a closed manifold");
    }
    let regime = id.regime();
    let (s, q) = match id {
        CorollaryId::Cor6_4 => {
            let s = params.s.unwrap_or(2.0);
            let q = params
                .q
                .ok_or_else(|| EstimateError::Invalid("Cor6_4 needs q".into()))?;
            let qi = exponents::q_admissible(p, m, s, QCorollary::Cor6_4)?;
            if !qi.admissible_interval.contains(q) {
                return invalid(format!("q = {q} outside [q1, q2] = [{}, {}]", qi.q1, qi.q2));
            }
            (Some(s), Some(q))
        }
        CorollaryId::Cor6_5 => {
            let q = params
                .q
                .ok_or_else(|| EstimateError::Invalid("Cor6_5 needs q".into()))?;
            let qi = exponents::q_admissible(p, m, 2.0, QCorollary::Cor6_5)?;
            if !qi.admissible_interval.contains(q) {
                return invalid(format!("q = {q} outside the admissible interval {:?}", qi.admissible_interval));
            }
            (Some(2.0), Some(q))
        }
        CorollaryId::Cor11_3 | CorollaryId::Cor11_4 => {
            if !exponents::regime_ii_admissible(p, m) {
                return invalid(format!("p = {p} must exceed p0(m)"));
            }
            let s = if id == CorollaryId::Cor11_3 { params.s.unwrap_or(2.0) } else { 2.0 };
            if s < 2.0 {
                return invalid("s must be at least 2");
            }
            (Some(s), None)
        }
    };

    let u = solve(scn)?;
    let v = pressure_transform(&u, p, regime)?;
    let kappa_min = superflow_margin(geom, &u, regime, p)?.kappa_super.unwrap_or(0.0);
    let kappa = match params.kappa {
        Some(k) if k + 1e-14 < kappa_min => {
            return Err(EstimateError::Hypothesis {
                statement: format!("super flow with k = {k} (needs k >= {kappa_min})"),
                violation: kappa_min - k,
            })
        }
        Some(k) => k,
        None => kappa_min,
    };

    let (nt, nx) = (v.nt(), v.nx());
    let umin = u.values.iter().copied().fold(f64::INFINITY, f64::min);
    let umax = u.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u_range = (umin, umax.max(umin * (1.0 + 1e-12)));
    let xs: Vec<f64> = (0..16).map(|i| u.nodes[i * nx / 16]).collect();

    // Growth constant a: the smallest value the bullet allows on the field
    // and on the sampled u-range.
    let growth = |t: f64, x: f64, vv: f64| -> f64 {
        let (sg, sv, _) = sigma_generic(&scn.nonlinearity, regime, p, &t, &x, &vv);
        match id {
            CorollaryId::Cor6_4 => q.unwrap_or(f64::NAN) / s.unwrap_or(f64::NAN) * sg / vv - sv,
            _ => sv,
        }
    };
    let a = match id {
        CorollaryId::Cor6_4 | CorollaryId::Cor11_3 => Some(match params.a {
            Some(a) => a,
            None => {
                let mut a = f64::NEG_INFINITY;
                for it in 0..nt {
                    for ix in 0..nx {
                        a = a.max(growth(v.times[it], v.nodes[ix], v.at(it, ix)));
                    }
                }
                let us = crate::nonlinearity::log_samples(u_range.0, u_range.1, 200)?;
                for &x in &xs {
                    for &uu in &us {
                        let vv = crate::nonlinearity::v_of_u(regime, p, &uu);
                        a = a.max(growth(scn.t_start, x, vv));
                    }
                }
                a
            }
        }),
        _ => None,
    };

    let gamma = match id {
        CorollaryId::Cor6_4 | CorollaryId::Cor11_3 => params.gamma,
        _ => GammaSpec::Zero,
    };
    let hp = HypothesisParams {
        p,
        beta: None,
        s,
        q,
        a,
        gamma,
        t: scn.t_start,
        xs: xs.clone(),
    };
    let mut hypotheses = Vec::new();
    for &hid in id.hypotheses() {
        let rep = condition_check(&scn.nonlinearity, hid, &hp, u_range, 200)?;
        if !rep.holds {
            return Err(EstimateError::Hypothesis {
                statement: rep.statement.clone(),
                violation: rep.worst_point.violation,
            });
        }
        hypotheses.push(rep);
    }

    // Field values of |∇v|², the ⟨∇v, Σ_x⟩ bullet, and the display.
    let mut field_viol = f64::NEG_INFINITY;
    let mut grads = Vec::with_capacity(nt * nx);
    for it in 0..nt {
        let t = v.times[it];
        let row = v.slice(it);
        let d = fd::d1(row, v.dx(), true);
        let e = geom.g_inv(t);
        for ix in 0..nx {
            let (_, _, sx) = sigma_generic(&scn.nonlinearity, regime, p, &t, &v.nodes[ix], &row[ix]);
            let pairing = e * d[ix] * sx;
            let viol = match regime {
                Regime::I => -pairing,
                Regime::II => pairing,
            };
            field_viol = field_viol.max(viol);
            grads.push(e * d[ix] * d[ix]);
        }
    }
    if field_viol > 1e-12 {
        return Err(EstimateError::Hypothesis {
            statement: "<grad v, Sigma_x> sign bullet on the solved field".into(),
            violation: field_viol,
        });
    }

    let gval = |vv: f64| gamma.eval(&vv).0;
    let (s_val, q_val) = (s.unwrap_or(2.0), q.unwrap_or(0.0));
    let initial_max = (0..nx)
        .map(|ix| {
            let vv = v.at(0, ix);
            let w = grads[ix];
            match id {
                CorollaryId::Cor6_4 => w.powf(s_val / 2.0) / vv.powf(q_val) + gval(vv),
                CorollaryId::Cor6_5 => vv.powf(1.0 - q_val),
                CorollaryId::Cor11_3 => w.powf(s_val / 2.0) + gval(vv),
                CorollaryId::Cor11_4 => vv.powf(2.0 * p / (2.0 * p - 1.0)),
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let prefactor = match id {
        CorollaryId::Cor6_5 => Some(cor6_5_prefactor(p, q_val)),
        CorollaryId::Cor11_4 => Some(cor11_4_prefactor(p)),
        _ => None,
    };

    let mut worst = f64::NEG_INFINITY;
    let (mut wx, mut wt) = (f64::NAN, f64::NAN);
    let mut max_rhs = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut nodes = 0;
    let mut margins = Vec::new();
    for it in 1..nt {
        let tau = v.times[it] - scn.t_start;
        for ix in 0..nx {
            let vv = v.at(it, ix);
            let w = grads[it * nx + ix];
            let a_val = a.unwrap_or(0.0);
            let (lhs, rhs) = match id {
                CorollaryId::Cor6_4 => (
                    w.powf(s_val / 2.0) / vv.powf(q_val),
                    growth_rhs(s_val, kappa, a_val, tau, initial_max, gval(vv)),
                ),
                CorollaryId::Cor6_5 => (
                    tau * w / vv.powf(q_val),
                    (1.0 + 2.0 * kappa * tau) * prefactor.unwrap_or(f64::NAN) * (initial_max - vv.powf(1.0 - q_val)),
                ),
                CorollaryId::Cor11_3 => (
                    w.powf(s_val / 2.0),
                    growth_rhs(s_val, kappa, a_val, tau, initial_max, gval(vv)),
                ),
                CorollaryId::Cor11_4 => (
                    tau * w / (1.0 + 2.0 * kappa * tau),
                    prefactor.unwrap_or(f64::NAN) * (initial_max - vv.powf(2.0 * p / (2.0 * p - 1.0))),
                ),
            };
            max_rhs = max_rhs.max(rhs.abs());
            if rhs > 0.0 {
                max_ratio = max_ratio.max(lhs / rhs);
            }
            let margin = lhs - rhs;
            if margin > worst || margin.is_nan() {
                worst = if margin.is_nan() { f64::INFINITY } else { margin };
                wx = v.nodes[ix];
                wt = v.times[it];
            }
            margins.push(margin);
            nodes += 1;
        }
    }
    let tolerance = MAX_PRINCIPLE_ABS_TOL + v.dx() * v.dx() * (1.0 + max_rhs);
    Ok(MaxPrincipleReport {
        id,
        p,
        m,
        s,
        q,
        a,
        kappa,
        gamma,
        prefactor,
        hypotheses,
        field_sigma_x_violation: field_viol,
        worst_margin: worst,
        worst_x: wx,
        worst_t: wt,
        max_ratio,
        max_rhs,
        tolerance,
        nodes,
        pass: nodes > 0 && worst <= tolerance,
    })
}

// ---------------------------------------------------------------------------
// Liouville mechanisms

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LiouvilleId {
    Thm2_4,
    Thm7_4,
}

impl LiouvilleId {
    pub fn estimate(self) -> EstimateId {
        match self {
            LiouvilleId::Thm2_4 => EstimateId::I_static,
            LiouvilleId::Thm7_4 => EstimateId::II_static,
        }
    }

    pub fn parse(name: &str) -> Option<LiouvilleId> {
        [LiouvilleId::Thm2_4, LiouvilleId::Thm7_4]
            .into_iter()
            .find(|id| format!("{id:?}").eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardOdeReport {
    pub a: f64,
    pub u0: f64,
    pub step: f64,
    /// First time (going backward) at which u reaches 0; None if it stays
    /// positive down to the time limit.
    pub t_fail: Option<f64>,
    /// -u0/a for constant 𝒩 ≡ a.
    pub expected: f64,
    pub rel_error: Option<f64>,
}

/// Integrate du/dt = 𝒩(u) backward from u(0) = u0 with RK4 steps of size
/// `step` and report when positivity fails.
pub fn backward_positivity(nonlin: &NonlinearitySpec, u0: f64, step: f64, t_limit: f64) -> Option<f64> {
    let h = -step.abs();
    let f = |u: f64| nonlin.eval_f64(0.0, 0.0, u).0;
    let (mut t, mut u) = (0.0f64, u0);
    while t > t_limit {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        let next = u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(next > 0.0) {
            // Linear interpolation of the zero crossing inside the step.
            let frac = if next.is_finite() { u / (u - next) } else { 0.5 };
            return Some(t + frac * h);
        }
        u = next;
        t += h;
    }
    None
}

pub fn backward_ode_report(a: f64, u0: f64, step: f64) -> Result<BackwardOdeReport, EstimateError> {
    if !(a > 0.0 && u0 > 0.0) {
        return invalid("backward ODE probe needs a > 0 and u0 > 0");
    }
    let nonlin = NonlinearitySpec::Power { c: a, a: 0.0 };
    let expected = -u0 / a;
    let t_fail = backward_positivity(&nonlin, u0, step, 10.0 * expected);
    Ok(BackwardOdeReport {
        a,
        u0,
        step,
        t_fail,
        expected,
        rel_error: t_fail.map(|t| ((t - expected) / expected).abs()),
    })
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub r: f64,
    pub t_depth: f64,
    pub M: f64,
    pub k: f64,
    /// Bracket of the static estimate at (x₀, t₀).
    pub bound: f64,
    /// Left side at (x₀, t₀).
    pub lhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleReport {
    pub id: LiouvilleId,
    pub hypotheses: Vec<ConditionReport>,
    /// Growth condition on the finite family (bounded and bounded away from 0).
    pub growth_ok: bool,
    pub sweep: Vec<SweepPoint>,
    /// bound(R)/bound(2R) for consecutive radii.
    pub decay_factors: Vec<f64>,
    pub ode: Option<BackwardOdeReport>,
    pub pass: bool,
}

/// Required decrease of the bound per doubling of R.
pub const LIOUVILLE_DECAY: f64 = 1.5;
/// Relative accuracy of the backward-ODE positivity time.
pub const ODE_TOL: f64 = 0.01;

/// Run the static estimate with T = R² over the given radii at the fixed
/// point (x0, end of the scenario), plus an optional backward ODE probe
/// (a, u0).
pub fn liouville_probe(
    id: LiouvilleId,
    scn: &ScenarioSpec,
    radii: &[f64],
    x0: f64,
    beta: BetaPolicy,
    ode: Option<(f64, f64)>,
) -> Result<LiouvilleReport, EstimateError> {
    if radii.is_empty() {
        return invalid("no radii");
    }
    let est = id.estimate();
    let p = scn.p;
    let beta_val = match est.regime() {
        Regime::I => Some(exponents::beta_selection(p, scn.geometry.m, beta)?.beta),
        Regime::II => None,
    };
    let hp = HypothesisParams {
        beta: beta_val,
        t: scn.t_start,
        ..HypothesisParams::new(p)
    };
    let hid = match id {
        LiouvilleId::Thm2_4 => HypothesisId::Thm2_4,
        LiouvilleId::Thm7_4 => HypothesisId::Thm7_4,
    };
    let check = |values: &[f64]| -> Result<ConditionReport, EstimateError> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rep = condition_check(&scn.nonlinearity, hid, &hp, (lo, hi.max(lo * (1.0 + 1e-12))), 200)?;
        if !rep.holds {
            return Err(EstimateError::Hypothesis {
                statement: rep.statement,
                violation: rep.worst_point.violation,
            });
        }
        Ok(rep)
    };
    // Reject on the initial data before paying for the long solve.
    check(&scn.initial_values()?)?;
    let u = solve(scn)?;
    let rep = check(&u.values)?;
    let umin = u.values.iter().copied().fold(f64::INFINITY, f64::min);
    let umax = u.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t0 = scn.t_end();
    let mut sweep = Vec::new();
    for &r in radii {
        let t_depth = r * r;
        if t_depth > scn.horizon * (1.0 + 1e-12) {
            return invalid(format!("R = {r} needs T = R^2 = {t_depth} beyond the horizon {}", scn.horizon));
        }
        let cyl = Cylinder { x0, t0, r, t_depth };
        let (level, evals) = estimate_nodes(est, &u, &scn.geometry, &scn.nonlinearity, p, beta, &cyl)?;
        if level.k > 0.0 {
            return invalid(format!("Ric_f^m >= 0 fails in the ball of radius {r} (k = {})", level.k));
        }
        let at = evals
            .iter()
            .filter(|n| (n.t - t0).abs() <= 1e-9 * (1.0 + t0.abs()))
            .min_by(|a, b| (a.x - x0).abs().total_cmp(&(b.x - x0).abs()))
            .copied()
            .ok_or_else(|| EstimateError::Invalid("no node at the final time".into()))?;
        sweep.push(SweepPoint {
            r,
            t_depth,
            M: level.M,
            k: level.k,
            bound: at.bracket,
            lhs: at.lhs,
        });
    }
    let decay_factors: Vec<f64> = sweep.windows(2).map(|w| w[0].bound / w[1].bound).collect();
    let ode = match ode {
        Some((a, u0)) => Some(backward_ode_report(a, u0, 1e-3)?),
        None => None,
    };
    let growth_ok = umin > 0.0 && umax.is_finite();
    let ode_ok = ode.map_or(true, |o| o.rel_error.is_some_and(|e| e <= ODE_TOL));
    let pass = growth_ok && ode_ok && decay_factors.iter().all(|&f| f >= LIOUVILLE_DECAY);
    Ok(LiouvilleReport {
        id,
        hypotheses: vec![rep],
        growth_ok,
        sweep,
        decay_factors,
        ode,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Lambda};
    use crate::solver::{GradientStencil, InitialCondition};
    use proptest::prelude::*;

    fn cyl() -> Cylinder {
        Cylinder { x0: 0.0, t0: 1.0, r: 2.0, t_depth: 1.0 }
    }

    #[test]
    fn cutoff_examples() {
        let c = build_cutoff(cyl(), 0.5, 0.75).unwrap();
        assert_eq!(c.kappa, 4);
        assert_eq!(c.eval(0.5, 1.0).eta, 1.0);
        for rho in [0.0, 0.7, 1.3, 2.0, 3.0] {
            assert_eq!(c.eval(rho, 0.0).eta, 0.0);
        }
        assert_eq!(c.eval(2.0, 0.8).eta, 0.0);
        assert!(build_cutoff(cyl(), 0.0, 0.5).is_err());
        assert!(build_cutoff(cyl(), 1.2, 0.5).is_err());
        assert!(build_cutoff(cyl(), 0.5, 1.0).is_err());
    }

    #[test]
    fn cutoff_properties_on_dense_sample() {
        for a in [0.5, 0.75, 0.9] {
            let c = build_cutoff(cyl(), 0.6, a).unwrap();
            let chk = c.verify(200);
            assert!(chk.pass, "{chk:?}");
            assert!((chk.c - 2.0).abs() < 1e-9, "{}", chk.c);
            assert!(chk.c_a.is_finite() && chk.c_a > 0.0);
        }
    }

    #[test]
    fn smooth_step_derivatives_match_differences() {
        let h = 1e-5;
        for y in [0.1, 0.3, 0.5, 0.8] {
            let (s, s1, s2) = smooth_step(y);
            let (sp, _, _) = smooth_step(y + h);
            let (sm, _, _) = smooth_step(y - h);
            assert!(((sp - sm) / (2.0 * h) - s1).abs() < 1e-6);
            assert!(((sp - 2.0 * s + sm) / (h * h) - s2).abs() < 1e-3);
        }
        assert_eq!(smooth_step(0.5).0, 0.5);
    }

    fn circle_scn(nonlin: NonlinearitySpec, amplitude: f64) -> ScenarioSpec {
        ScenarioSpec {
            geometry: GeometrySpec::new(
                3.0,
                Domain::Circle { length: std::f64::consts::TAU },
                Lambda::Linear { lambda0: 0.0, rate: -0.1 },
                Potential::Cosine { a: 0.3, kappa: 1.0 },
            )
            .unwrap(),
            nonlinearity: nonlin,
            p: 0.75,
            initial: InitialCondition::ConstantPlusBump { base: 1.0, amplitude, center: 1.0, width: 1.0 },
            nx: 64,
            cfl: 0.4,
            dt: None,
            t_start: 0.0,
            horizon: 0.5,
            stride: 4,
            oracle: None,
            stencil: GradientStencil::Central,
        }
    }

    #[test]
    fn constant_data_gives_zero_ratio() {
        let scn = ScenarioSpec {
            geometry: GeometrySpec::new(3.0, Domain::Circle { length: std::f64::consts::TAU }, Lambda::Constant { lambda0: 0.0 }, Potential::Zero).unwrap(),
            ..circle_scn(NonlinearitySpec::Zero, 0.0)
        };
        let u = solve(&scn).unwrap();
        let c = Cylinder { x0: 0.0, t0: 0.5, r: 2.0, t_depth: 0.5 };
        for id in EstimateId::ALL {
            let lvl = verify_estimate(id, &u, &scn.geometry, &scn.nonlinearity, 0.75, BetaPolicy::Midpoint, &c).unwrap();
            assert_eq!(lvl.ratio_max, 0.0, "{id:?}");
        }
    }

    #[test]
    fn static_estimate_rejects_moving_metric() {
        let scn = circle_scn(NonlinearitySpec::Zero, 0.3);
        let u = solve(&scn).unwrap();
        let c = Cylinder { x0: 0.0, t0: 0.5, r: 2.0, t_depth: 0.5 };
        assert!(verify_estimate(EstimateId::I_static, &u, &scn.geometry, &scn.nonlinearity, 0.75, BetaPolicy::Midpoint, &c).is_err());
        let lvl = verify_estimate(EstimateId::I_local, &u, &scn.geometry, &scn.nonlinearity, 0.75, BetaPolicy::Midpoint, &c).unwrap();
        assert!(lvl.ratio_max.is_finite() && lvl.ratio_max > 0.0);
        assert!((lvl.h - 0.1).abs() < 1e-12);
    }

    #[test]
    fn regime_windows_are_enforced() {
        let mut scn = circle_scn(NonlinearitySpec::Zero, 0.3);
        scn.p = 0.3;
        let u = solve(&scn).unwrap();
        let c = Cylinder { x0: 0.0, t0: 0.5, r: 2.0, t_depth: 0.5 };
        assert!(verify_estimate(EstimateId::I_local, &u, &scn.geometry, &scn.nonlinearity, 0.3, BetaPolicy::Midpoint, &c).is_err());
        assert!(verify_estimate(EstimateId::II_local, &u, &scn.geometry, &scn.nonlinearity, 0.3, BetaPolicy::Midpoint, &c).is_err());
    }

    #[test]
    fn prefactors() {
        assert!((cor11_4_prefactor(0.75) - 0.25 / 3.375).abs() < 1e-15);
        assert!((cor11_4_prefactor(0.75) - 0.074074).abs() < 1e-6);
        assert!((1.0 / cor6_5_prefactor(0.75, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn corollaries_hold_on_gradient_free_data() {
        for id in CorollaryId::ALL {
            let (nonlin, prm) = match id {
                CorollaryId::Cor6_4 => (NonlinearitySpec::Power { c: 0.5, a: 1.0 }, MaxPrincipleParams { q: Some(1.0), s: Some(2.0), ..Default::default() }),
                CorollaryId::Cor6_5 => (NonlinearitySpec::Power { c: -0.2, a: 1.0 }, MaxPrincipleParams { q: Some(2.5), ..Default::default() }),
                CorollaryId::Cor11_3 => (NonlinearitySpec::Power { c: 0.2, a: 1.0 }, MaxPrincipleParams::default()),
                CorollaryId::Cor11_4 => (NonlinearitySpec::Power { c: -0.2, a: 1.0 }, MaxPrincipleParams::default()),
            };
            let mut scn = circle_scn(nonlin, 0.0);
            scn.geometry.potential = Potential::Zero;
            let rep = max_principle_check(id, &scn, &prm).unwrap();
            assert!(rep.pass && rep.worst_margin <= 1e-12, "{id:?} {}", rep.worst_margin);
        }
    }

    #[test]
    fn corollaries_hold_on_bump_data() {
        for id in CorollaryId::ALL {
            let (nonlin, prm) = match id {
                CorollaryId::Cor6_4 => (NonlinearitySpec::Power { c: 0.5, a: 1.0 }, MaxPrincipleParams { q: Some(1.0), s: Some(2.0), ..Default::default() }),
                CorollaryId::Cor6_5 => (NonlinearitySpec::Power { c: -0.2, a: 1.0 }, MaxPrincipleParams { q: Some(2.5), ..Default::default() }),
                CorollaryId::Cor11_3 => (NonlinearitySpec::Power { c: 0.2, a: 1.0 }, MaxPrincipleParams::default()),
                CorollaryId::Cor11_4 => (NonlinearitySpec::Power { c: -0.2, a: 1.0 }, MaxPrincipleParams::default()),
            };
            let rep = max_principle_check(id, &circle_scn(nonlin, 0.5), &prm).unwrap();
            assert!(rep.pass, "{id:?}: margin {} tol {}", rep.worst_margin, rep.tolerance);
        }
    }

    #[test]
    fn failing_hypothesis_is_reported() {
        let scn = circle_scn(NonlinearitySpec::Power { c: 0.2, a: 1.0 }, 0.5);
        let err = max_principle_check(CorollaryId::Cor11_4, &scn, &MaxPrincipleParams::default()).unwrap_err();
        assert!(matches!(err, EstimateError::Hypothesis { .. }), "{err}");
        let err = max_principle_check(CorollaryId::Cor6_5, &scn, &MaxPrincipleParams { q: Some(0.5), ..Default::default() }).unwrap_err();
        assert!(matches!(err, EstimateError::Invalid(_)), "{err}");
    }

    #[test]
    fn backward_ode_linear_case() {
        let rep = backward_ode_report(1.0, 5.0, 1e-3).unwrap();
        assert!(rep.rel_error.unwrap() < 1e-9, "{rep:?}");
        let rep = backward_ode_report(2.0, 5.0, 1e-3).unwrap();
        assert!((rep.t_fail.unwrap() + 2.5).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn growth_rhs_monotone_in_constants(
            s in 2.0f64..6.0, k in 0.0f64..2.0, a in -1.0f64..2.0, dk in 0.0f64..1.0, da in 0.0f64..1.0,
            tau in 0.0f64..2.0, h0 in 0.0f64..5.0, g in 0.0f64..1.0,
        ) {
            // Nonnegative brace: lowering k or a never raises the bound.
            let h0 = h0 + g;
            let hi = growth_rhs(s, k + dk, a + da, tau, h0, g);
            prop_assert!(growth_rhs(s, k, a + da, tau, h0, g) <= hi);
            prop_assert!(growth_rhs(s, k + dk, a, tau, h0, g) <= hi);
        }

        #[test]
        fn cutoff_ranges_hold_pointwise(rho in 0.0f64..3.0, t in 0.0f64..1.0, a in 0.05f64..0.95) {
            let c = build_cutoff(cyl(), 0.5, a).unwrap();
            let v = c.eval(rho, t);
            prop_assert!((0.0..=1.0).contains(&v.eta));
            prop_assert!(v.d_rho <= 0.0);
            if v.eta > 0.0 {
                prop_assert!(v.d_t.abs() / v.eta.sqrt() <= 2.0 / 0.5 + 1e-9);
            }
        }
    }
}
