//! Closed-form geometry of the 1-D conformal weighted models.
//!
//! The metric is g(t) = e^{2λ(t)} dx² with λ spatially constant, the
//! measure is e^{-f} dv_g. Every tensor in the weighted Bochner calculus
//! reduces to a scalar: with e = e^{-2λ},
//! |∇v|² = e v_x², Δ_f v = e (v_xx - f_x v_x) and
//! Ric_f^m(∂x, ∂x) = f_xx - f_x²/(m - n).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd;
use crate::solver::{FieldKind, SpaceTimeField};
use crate::Regime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("synthetic dimension m = {m} must be at least n = {n}")]
    DimensionTooSmall { m: f64, n: u32 },
    #[error("only n = 1 is supported, got n = {0}")]
    UnsupportedDimension(u32),
    #[error("m = n requires a spatially constant potential")]
    NonconstantPotential,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("potential is not smooth on the periodic circle: {0}")]
    NonPeriodicPotential(String),
    #[error("boundary {boundary:?} is incompatible with the domain")]
    BoundaryMismatch { boundary: Boundary },
    #[error("grid length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("non-positive value at index {0}")]
    NonPositive(usize),
    #[error("position {0} lies outside the domain")]
    OutsideDomain(f64),
    #[error("cylinder sample set is empty")]
    EmptySample,
    #[error("exponent p = {p} is outside the range of regime {regime:?}")]
    BadExponent { p: f64, regime: Regime },
    #[error("field stores {got:?} but regime {regime:?} was requested")]
    FieldKindMismatch { got: FieldKind, regime: Regime },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Circle { length: f64 },
    Interval { x_lo: f64, x_hi: f64 },
}

impl Domain {
    pub fn is_closed(&self) -> bool {
        matches!(self, Domain::Circle { .. })
    }
}

/// Conformal log-factor λ(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Lambda {
    Constant { lambda0: f64 },
    Linear { lambda0: f64, rate: f64 },
}

impl Lambda {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Lambda::Constant { lambda0 } => lambda0,
            Lambda::Linear { lambda0, rate } => lambda0 + rate * t,
        }
    }

    /// λ'(t)
    pub fn rate(&self, _t: f64) -> f64 {
        match *self {
            Lambda::Constant { .. } => 0.0,
            Lambda::Linear { rate, .. } => rate,
        }
    }

    /// λ''(t)
    pub fn rate_dt(&self, _t: f64) -> f64 {
        0.0
    }

    pub fn is_static(&self) -> bool {
        self.rate(0.0) == 0.0
    }
}

/// Potential f(x, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// f = a x²/2
    Quadratic { a: f64 },
    /// f = a cos(κ x)
    Cosine { a: f64, kappa: f64 },
    /// f = e^{rate t} base
    TimeScaled { base: Box<Potential>, rate: f64 },
}

impl Potential {
    /// k-th x-derivative of f.
    pub fn dx_k(&self, k: usize, x: f64, t: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Quadratic { a } => match k {
                0 => 0.5 * a * x * x,
                1 => a * x,
                2 => *a,
                _ => 0.0,
            },
            Potential::Cosine { a, kappa } => {
                let phase = k as f64 * std::f64::consts::FRAC_PI_2;
                a * kappa.powi(k as i32) * (kappa * x + phase).cos()
            }
            Potential::TimeScaled { base, rate } => (rate * t).exp() * base.dx_k(k, x, t),
        }
    }

    /// Time derivative of the k-th x-derivative.
    pub fn dx_k_dt(&self, k: usize, x: f64, t: f64) -> f64 {
        match self {
            Potential::Zero | Potential::Quadratic { .. } | Potential::Cosine { .. } => 0.0,
            Potential::TimeScaled { base, rate } => {
                (rate * t).exp() * (rate * base.dx_k(k, x, t) + base.dx_k_dt(k, x, t))
            }
        }
    }

    pub fn is_spatially_constant(&self) -> bool {
        match self {
            Potential::Zero => true,
            Potential::Quadratic { a } => *a == 0.0,
            Potential::Cosine { a, kappa } => *a == 0.0 || *kappa == 0.0,
            Potential::TimeScaled { base, .. } => base.is_spatially_constant(),
        }
    }

    fn check_periodic(&self, length: f64) -> Result<(), GeometryError> {
        match self {
            Potential::Zero => Ok(()),
            Potential::Quadratic { a } if *a == 0.0 => Ok(()),
            Potential::Quadratic { .. } => Err(GeometryError::NonPeriodicPotential(
                "quadratic potential on a circle".into(),
            )),
            Potential::Cosine { a, kappa } => {
                let cycles = kappa * length / std::f64::consts::TAU;
                if *a == 0.0 || (cycles - cycles.round()).abs() < 1e-9 {
                    Ok(())
                } else {
                    Err(GeometryError::NonPeriodicPotential(format!(
                        "kappa L / 2pi = {cycles} is not an integer"
                    )))
                }
            }
            Potential::TimeScaled { base, .. } => base.check_periodic(length),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    DirichletFromOracle,
}

/// A model smooth metric measure space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default = "one")]
    pub n: u32,
    pub m: f64,
    pub domain: Domain,
    pub lambda: Lambda,
    pub potential: Potential,
    pub boundary: Boundary,
}

fn one() -> u32 {
    1
}

impl GeometrySpec {
    pub fn new(
        m: f64,
        domain: Domain,
        lambda: Lambda,
        potential: Potential,
    ) -> Result<Self, GeometryError> {
        let boundary = match domain {
            Domain::Circle { .. } => Boundary::Periodic,
            Domain::Interval { .. } => Boundary::DirichletFromOracle,
        };
        let g = GeometrySpec {
            n: 1,
            m,
            domain,
            lambda,
            potential,
            boundary,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.n != 1 {
            return Err(GeometryError::UnsupportedDimension(self.n));
        }
        if !(self.m >= self.n as f64) {
            return Err(GeometryError::DimensionTooSmall { m: self.m, n: self.n });
        }
        if self.m == self.n as f64 && !self.potential.is_spatially_constant() {
            return Err(GeometryError::NonconstantPotential);
        }
        match self.domain {
            Domain::Circle { length } => {
                if !(length > 0.0) || !length.is_finite() {
                    return Err(GeometryError::InvalidDomain(format!("circle length {length}")));
                }
                if self.boundary != Boundary::Periodic {
                    return Err(GeometryError::BoundaryMismatch { boundary: self.boundary });
                }
                self.potential.check_periodic(length)?;
            }
            Domain::Interval { x_lo, x_hi } => {
                if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
                    return Err(GeometryError::InvalidDomain(format!("interval [{x_lo}, {x_hi}]")));
                }
                if self.boundary != Boundary::DirichletFromOracle {
                    return Err(GeometryError::BoundaryMismatch { boundary: self.boundary });
                }
            }
        }
        Ok(())
    }

    pub fn periodic(&self) -> bool {
        self.domain.is_closed()
    }

    /// 1/(m - n), or 0 when m = n (the potential is constant then).
    pub fn inv_m_minus_n(&self) -> f64 {
        let d = self.m - self.n as f64;
        if d > 0.0 {
            1.0 / d
        } else {
            0.0
        }
    }

    /// e^{-2λ(t)}
    pub fn g_inv(&self, t: f64) -> f64 {
        (-2.0 * self.lambda.value(t)).exp()
    }
}

/// Uniform node layout on a domain. Circles use `nx` nodes with spacing
/// L/nx; intervals use `nx` nodes including both end points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub domain: Domain,
    pub nx: usize,
}

impl Grid1D {
    pub fn new(domain: Domain, nx: usize) -> Self {
        Grid1D { domain, nx }
    }

    pub fn dx(&self) -> f64 {
        match self.domain {
            Domain::Circle { length } => length / self.nx as f64,
            Domain::Interval { x_lo, x_hi } => (x_hi - x_lo) / (self.nx - 1) as f64,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.dx();
        let x0 = match self.domain {
            Domain::Circle { .. } => 0.0,
            Domain::Interval { x_lo, .. } => x_lo,
        };
        (0..self.nx).map(|i| x0 + i as f64 * h).collect()
    }

    pub fn periodic(&self) -> bool {
        self.domain.is_closed()
    }
}

/// Curvature inputs of the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub k: f64,
    pub h: f64,
    pub kappa_super: Option<f64>,
}

/// Q_{R,T}(x0, t0) = {(x,t) : d(x, x0, t) <= R, t0 - T <= t <= t0}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub x0: f64,
    pub t0: f64,
    pub r: f64,
    pub t_depth: f64,
}

impl Cylinder {
    pub fn contains(&self, geom: &GeometrySpec, x: f64, t: f64) -> bool {
        let tol = 1e-12 * (1.0 + self.t0.abs() + self.t_depth);
        if t < self.t0 - self.t_depth - tol || t > self.t0 + tol {
            return false;
        }
        match geodesic_distance(geom, x, self.x0, t) {
            Ok(d) => d <= self.r * (1.0 + 1e-12),
            Err(_) => false,
        }
    }

    /// The cylinder with radius R/2 and the same time depth.
    pub fn half(&self) -> Cylinder {
        Cylinder {
            r: 0.5 * self.r,
            ..*self
        }
    }
}

/// Discrete Δ_f v at time t.
pub fn f_laplacian(
    v: &[f64],
    grid: &Grid1D,
    t: f64,
    geom: &GeometrySpec,
) -> Result<Vec<f64>, GeometryError> {
    if v.len() != grid.nx {
        return Err(GeometryError::LengthMismatch {
            expected: grid.nx,
            got: v.len(),
        });
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite(i));
    }
    let h = grid.dx();
    let periodic = grid.periodic();
    let vx = fd::d1(v, h, periodic);
    let vxx = fd::d2(v, h, periodic);
    let e = geom.g_inv(t);
    Ok(grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| e * (vxx[i] - geom.potential.dx_k(1, x, t) * vx[i]))
        .collect())
}

/// Ric_f^m(∂x, ∂x) = f_xx - f_x²/(m - n); for m = n this is the 1-D
/// Ricci component, i.e. zero.
pub fn bakry_emery_m(geom: &GeometrySpec, x: f64, t: f64) -> f64 {
    let inv = geom.inv_m_minus_n();
    if inv == 0.0 {
        return 0.0;
    }
    let fx = geom.potential.dx_k(1, x, t);
    geom.potential.dx_k(2, x, t) - fx * fx * inv
}

/// Riemannian distance at time t.
pub fn geodesic_distance(
    geom: &GeometrySpec,
    x: f64,
    x0: f64,
    t: f64,
) -> Result<f64, GeometryError> {
    let scale = geom.lambda.value(t).exp();
    match geom.domain {
        Domain::Circle { length } => {
            let d = (x - x0).rem_euclid(length);
            Ok(scale * d.min(length - d))
        }
        Domain::Interval { x_lo, x_hi } => {
            let tol = 1e-12 * (x_hi - x_lo);
            for p in [x, x0] {
                if p < x_lo - tol || p > x_hi + tol {
                    return Err(GeometryError::OutsideDomain(p));
                }
            }
            Ok(scale * (x - x0).abs())
        }
    }
}

/// k and h sampled over the cylinder nodes among `nodes` × `times`.
pub fn curvature_bounds_on(
    geom: &GeometrySpec,
    cyl: Option<&Cylinder>,
    nodes: &[f64],
    times: &[f64],
) -> Result<CurvatureBounds, GeometryError> {
    let mut k: f64 = 0.0;
    let mut h: f64 = 0.0;
    let mut any = false;
    let denom = (geom.m - 1.0).max(f64::MIN_POSITIVE);
    for &t in times {
        let mut slice_hit = false;
        for &x in nodes {
            if let Some(c) = cyl {
                if !c.contains(geom, x, t) {
                    continue;
                }
            }
            slice_hit = true;
            let ric = geom.g_inv(t) * bakry_emery_m(geom, x, t);
            if geom.m > 1.0 {
                k = k.max(-ric / denom);
            }
        }
        if slice_hit {
            any = true;
            h = h.max(-geom.lambda.rate(t));
        }
    }
    if !any {
        return Err(GeometryError::EmptySample);
    }
    Ok(CurvatureBounds {
        k,
        h,
        kappa_super: None,
    })
}

/// k and h over the cylinder sampled at `grid` nodes and `nt` uniform times.
pub fn curvature_bounds(
    geom: &GeometrySpec,
    cyl: &Cylinder,
    grid: &Grid1D,
    nt: usize,
) -> Result<CurvatureBounds, GeometryError> {
    if nt == 0 || grid.nx == 0 {
        return Err(GeometryError::EmptySample);
    }
    let times: Vec<f64> = if nt == 1 {
        vec![cyl.t0]
    } else {
        (0..nt)
            .map(|j| cyl.t0 - cyl.t_depth + cyl.t_depth * j as f64 / (nt - 1) as f64)
            .collect()
    };
    curvature_bounds_on(geom, Some(cyl), &grid.nodes(), &times)
}

/// Diffusion coefficient c(v) of the regime's operator ∂t - c(v) Δ_f.
pub fn diffusion_coefficient(regime: Regime, p: f64, v: f64) -> f64 {
    match regime {
        Regime::I => (1.0 - p) * v,
        Regime::II => p * v.powf(2.0 * (p - 1.0) / (2.0 * p - 1.0)),
    }
}

/// Pointwise super-flow margin λ' + c(v) e^{-2λ} Ric_f^m.
pub fn superflow_margin_at(geom: &GeometrySpec, regime: Regime, p: f64, x: f64, t: f64, v: f64) -> f64 {
    geom.lambda.rate(t)
        + diffusion_coefficient(regime, p, v) * geom.g_inv(t) * bakry_emery_m(geom, x, t)
}

/// k, h and the minimal 𝗄 for which the regime's super flow holds at every
/// node of the field.
pub fn superflow_margin(
    geom: &GeometrySpec,
    field: &SpaceTimeField,
    regime: Regime,
    p: f64,
) -> Result<CurvatureBounds, GeometryError> {
    let ok = match regime {
        Regime::I => p > 0.0 && p < 1.0,
        Regime::II => p > 0.5 && p < 1.0,
    };
    if !ok {
        return Err(GeometryError::BadExponent { p, regime });
    }
    let v = match field.kind {
        FieldKind::U => crate::solver::pressure_transform(field, p, regime)
            .map_err(|_| GeometryError::BadExponent { p, regime })?,
        FieldKind::VI if regime == Regime::I => field.clone(),
        FieldKind::VII if regime == Regime::II => field.clone(),
        got => return Err(GeometryError::FieldKindMismatch { got, regime }),
    };
    if let Some(i) = v.values.iter().position(|&x| !(x > 0.0)) {
        return Err(GeometryError::NonPositive(i));
    }
    let mut bounds = curvature_bounds_on(geom, None, &v.nodes, &v.times)?;
    let mut min_margin = f64::INFINITY;
    for (it, &t) in v.times.iter().enumerate() {
        for (ix, &x) in v.nodes.iter().enumerate() {
            let m = superflow_margin_at(geom, regime, p, x, t, v.at(it, ix));
            min_margin = min_margin.min(m);
        }
    }
    bounds.kappa_super = Some((-min_margin).max(0.0));
    Ok(bounds)
}
