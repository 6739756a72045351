//! Run configuration: schema, loading (TOML or JSON), default resolution
//! and up-front validation of every task.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimates::{build_cutoff, CorollaryId, EstimateId, LiouvilleId, MaxPrincipleParams};
use crate::exponents::{self, BetaPolicy, QCorollary};
use crate::geometry::{Cylinder, Domain, GeometrySpec, Potential};
use crate::identities::{AnalyticProfile, IdentityId, IdentityParams};
use crate::nonlinearity::NonlinearitySpec;
use crate::solver::{GradientStencil, InitialCondition, Oracle, ScenarioSpec};

use super::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_levels() -> usize {
    3
}

fn default_cfl() -> f64 {
    0.4
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Refinement levels for studies without their own setting.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub exponents: ExponentBlock,
    #[serde(default)]
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub solver: Option<SolverBlock>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentBlock {
    pub p: f64,
    pub m: f64,
    #[serde(default)]
    pub beta: BetaPolicy,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
}

/// Resolution and initial data of the one solved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub initial: InitialCondition,
    pub nx: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_start: f64,
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub oracle: Option<Oracle>,
    #[serde(default)]
    pub stencil: GradientStencil,
}

/// Overrides of the pass thresholds that are not fixed by a convergence
/// rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute part of the corollary tolerance.
    #[serde(default = "default_mp_tol")]
    pub max_principle_abs: f64,
    /// Upper bound on C* for estimate tasks; none by default.
    #[serde(default)]
    pub estimate_c_budget: Option<f64>,
    /// Required bound decrease per doubling of R.
    #[serde(default = "default_decay")]
    pub liouville_decay: f64,
    /// Relative accuracy of the backward positivity time.
    #[serde(default = "default_ode_tol")]
    pub ode_rel: f64,
}

fn default_mp_tol() -> f64 {
    crate::estimates::MAX_PRINCIPLE_ABS_TOL
}

fn default_decay() -> f64 {
    crate::estimates::LIOUVILLE_DECAY
}

fn default_ode_tol() -> f64 {
    crate::estimates::ODE_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            max_principle_abs: default_mp_tol(),
            estimate_c_budget: None,
            liouville_decay: default_decay(),
            ode_rel: default_ode_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticBlock {
    pub profile: AnalyticProfile,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_times() -> Vec<f64> {
    vec![0.0, 0.5]
}

fn default_samples() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeProbe {
    pub a: f64,
    pub u0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Exponents {},
    Solve {},
    Convergence {
        #[serde(default)]
        levels: Option<usize>,
    },
    Identity {
        id: IdentityId,
        #[serde(default)]
        params: IdentityParams,
        /// Evaluate on an analytic profile instead of the solved scenario.
        #[serde(default)]
        analytic: Option<AnalyticBlock>,
        #[serde(default)]
        levels: Option<usize>,
    },
    MatrixVariational {
        n: usize,
        samples: usize,
        #[serde(default)]
        optimize: bool,
    },
    Cutoff {
        cylinder: Cylinder,
        tau: f64,
        a: f64,
        #[serde(default = "default_cutoff_samples")]
        samples: usize,
    },
    Estimate {
        id: EstimateId,
        cylinder: Cylinder,
        #[serde(default)]
        levels: Option<usize>,
    },
    MaxPrinciple {
        id: CorollaryId,
        #[serde(default)]
        params: MaxPrincipleParams,
    },
    Liouville {
        id: LiouvilleId,
        radii: Vec<f64>,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        ode: Option<OdeProbe>,
    },
}

fn default_cutoff_samples() -> usize {
    512
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Exponents {} => "exponents",
            Task::Solve {} => "solve",
            Task::Convergence { .. } => "convergence",
            Task::Identity { .. } => "identity",
            Task::MatrixVariational { .. } => "matrix_variational",
            Task::Cutoff { .. } => "cutoff",
            Task::Estimate { .. } => "estimate",
            Task::MaxPrinciple { .. } => "max_principle",
            Task::Liouville { .. } => "liouville",
        }
    }

    /// Identifier used in report names, e.g. `estimate/I_static`.
    pub fn label(&self) -> String {
        match self {
            Task::Identity { id, .. } => format!("identity/{id:?}"),
            Task::MatrixVariational { n, .. } => format!("matrix_variational/n{n}"),
            Task::Estimate { id, .. } => format!("estimate/{id:?}"),
            Task::MaxPrinciple { id, .. } => format!("max_principle/{id:?}"),
            Task::Liouville { id, .. } => format!("liouville/{id:?}"),
            other => other.kind().to_string(),
        }
    }

    fn needs_scenario(&self) -> bool {
        match self {
            Task::Exponents {} | Task::MatrixVariational { .. } | Task::Cutoff { .. } => false,
            Task::Identity { analytic, id, .. } => {
                analytic.is_none() && !matches!(id, IdentityId::CothBound | IdentityId::CutoffLaplacian)
            }
            _ => true,
        }
    }
}

/// Parse a configuration from text. JSON is recognised by a leading `{`;
/// a JSON report is accepted too, in which case its echoed `inputs` are
/// used.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let value = match value.get("inputs") {
            Some(inputs) if value.get("schema_version").is_some() && value.get("pass").is_some() => inputs.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid TOML config: {e}")))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    /// Minimal config for exponent arithmetic only.
    pub fn exponents_only(p: f64, m: f64) -> RunConfig {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            levels: default_levels(),
            output_dir: None,
            exponents: ExponentBlock { p, m, beta: BetaPolicy::Midpoint, s: None, q: None },
            geometry: None,
            nonlinearity: NonlinearitySpec::Zero,
            solver: None,
            tolerances: Tolerances::default(),
            tasks: vec![Task::Exponents {}],
        }
    }

    pub fn scenario(&self) -> Option<ScenarioSpec> {
        let (geometry, s) = (self.geometry.clone()?, self.solver.clone()?);
        Some(ScenarioSpec {
            geometry,
            nonlinearity: self.nonlinearity.clone(),
            p: self.exponents.p,
            initial: s.initial,
            nx: s.nx,
            cfl: s.cfl,
            dt: s.dt,
            t_start: s.t_start,
            horizon: s.horizon,
            stride: s.stride,
            oracle: s.oracle,
            stencil: s.stencil,
        })
    }

    /// β from the exponent block when regime I is available.
    pub fn beta(&self) -> Option<f64> {
        exponents::beta_selection(self.exponents.p, self.exponents.m, self.exponents.beta)
            .ok()
            .map(|d| d.beta)
    }

    /// Fill every task-level default from the global blocks, so that the
    /// echoed config states all values explicitly.
    pub fn resolve_task(&self, task: &Task) -> Task {
        let mut t = task.clone();
        match &mut t {
            Task::Convergence { levels } | Task::Estimate { levels, .. } => {
                levels.get_or_insert(self.levels);
            }
            Task::Identity { params, levels, .. } => {
                levels.get_or_insert(self.levels);
                if params.beta.is_none() {
                    params.beta = self.beta();
                }
                params.s = params.s.or(self.exponents.s);
                params.q = params.q.or(self.exponents.q);
            }
            Task::MaxPrinciple { id, params } => match id {
                CorollaryId::Cor6_4 => {
                    params.s = params.s.or(self.exponents.s).or(Some(2.0));
                    params.q = params.q.or(self.exponents.q);
                }
                CorollaryId::Cor6_5 => params.q = params.q.or(self.exponents.q),
                CorollaryId::Cor11_3 => params.s = params.s.or(self.exponents.s).or(Some(2.0)),
                CorollaryId::Cor11_4 => {}
            },
            _ => {}
        }
        t
    }

    /// The config echoed into the report of one task.
    pub fn echo_for(&self, task: &Task) -> RunConfig {
        RunConfig {
            output_dir: None,
            tasks: vec![self.resolve_task(task)],
            ..self.clone()
        }
    }

    /// Schema and precondition checks run before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version = {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let (p, m) = (self.exponents.p, self.exponents.m);
        if !(p > 0.0 && p < 1.0) {
            return bad(format!("exponents.p = {p} must lie in (0, 1)"));
        }
        let (p_c, p_0) = exponents::critical_exponents(m).map_err(|e| CliError::Config(format!("exponents.m: {e}")))?;
        if let BetaPolicy::Explicit { .. } = self.exponents.beta {
            if p > p_c {
                exponents::beta_selection(p, m, self.exponents.beta)
                    .map_err(|e| CliError::Config(format!("exponents.beta: {e}")))?;
            }
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if let Some(g) = &self.geometry {
            g.validate().map_err(|e| CliError::Config(format!("geometry: {e}")))?;
            if g.m != m {
                return bad(format!("geometry.m = {} differs from exponents.m = {m}", g.m));
            }
        }
        let scenario = self.scenario();
        let needs = self.tasks.iter().any(Task::needs_scenario);
        if needs {
            let Some(scn) = &scenario else {
                return bad("tasks need a solved scenario: add [geometry] and [solver] blocks".into());
            };
            scn.validate().map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        }
        for (i, task) in self.tasks.iter().enumerate() {
            let task = self.resolve_task(task);
            let ctx = |msg: String| CliError::Config(format!("task {i} ({}): {msg}", task.label()));
            match &task {
                Task::Exponents {} | Task::Solve {} => {}
                Task::Convergence { levels } => {
                    if levels.unwrap_or(0) < 3 {
                        return Err(ctx("a convergence study needs at least 3 levels".into()));
                    }
                }
                Task::Identity { id, params, analytic, levels } => {
                    validate_identity(*id, params, analytic.is_some(), self.geometry.is_some())
                        .map_err(ctx)?;
                    if analytic.is_none() && levels.unwrap_or(0) == 0 {
                        return Err(ctx("levels must be at least 1".into()));
                    }
                    if let Some(a) = analytic {
                        if a.samples == 0 || a.times.is_empty() {
                            return Err(ctx("analytic block needs samples and times".into()));
                        }
                    }
                }
                Task::MatrixVariational { n, samples, .. } => {
                    if *n < 2 || *samples == 0 {
                        return Err(ctx("needs n >= 2 and samples >= 1".into()));
                    }
                }
                Task::Cutoff { cylinder, tau, a, samples } => {
                    build_cutoff(*cylinder, *tau, *a).map_err(|e| ctx(e.to_string()))?;
                    if *samples < 2 {
                        return Err(ctx("samples must be at least 2".into()));
                    }
                }
                Task::Estimate { id, cylinder, levels } => {
                    let geom = self.geometry.as_ref().expect("checked above");
                    match id.regime() {
                        crate::Regime::I if !(p > p_c) => {
                            return Err(ctx(format!("regime I needs p > p_c = {p_c}")))
                        }
                        crate::Regime::II if !(p > p_0) => {
                            return Err(ctx(format!("regime II needs p > p0 = {p_0}")))
                        }
                        _ => {}
                    }
                    if id.is_global() && !geom.periodic() {
                        return Err(ctx("global estimates need a closed (circle) geometry".into()));
                    }
                    if id.is_static() && !(geom.lambda.is_static() && static_potential(&geom.potential)) {
                        return Err(ctx("static estimates need a time-independent metric and potential".into()));
                    }
                    if !(cylinder.r > 0.0 && cylinder.t_depth > 0.0) {
                        return Err(ctx("cylinder needs r > 0 and t_depth > 0".into()));
                    }
                    if levels.unwrap_or(0) == 0 {
                        return Err(ctx("levels must be at least 1".into()));
                    }
                }
                Task::MaxPrinciple { id, params } => {
                    let geom = self.geometry.as_ref().expect("checked above");
                    if !geom.periodic() {
                        return Err(ctx("corollaries need a closed (circle) geometry".into()));
                    }
                    validate_corollary(*id, p, m, params).map_err(ctx)?;
                }
                Task::Liouville { id, radii, ode, .. } => {
                    let scn = scenario.as_ref().expect("checked above");
                    let (needed, name) = match id {
                        LiouvilleId::Thm2_4 => (p_c, "p_c"),
                        LiouvilleId::Thm7_4 => (p_0, "p0"),
                    };
                    if !(p > needed) {
                        return Err(ctx(format!("needs p > {name} = {needed}")));
                    }
                    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                        return Err(ctx("radii must be a nonempty list of positive numbers".into()));
                    }
                    if let Some(r) = radii.iter().find(|r| *r * *r > scn.horizon * (1.0 + 1e-12)) {
                        return Err(ctx(format!("R = {r} needs T = R^2 beyond the horizon {}", scn.horizon)));
                    }
                    if !(scn.geometry.lambda.is_static() && static_potential(&scn.geometry.potential)) {
                        return Err(ctx("the probe needs a static geometry".into()));
                    }
                    if let Some(o) = ode {
                        if !(o.a > 0.0 && o.u0 > 0.0) {
                            return Err(ctx("ode probe needs a > 0 and u0 > 0".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn static_potential(pot: &Potential) -> bool {
    match pot {
        Potential::TimeScaled { base, rate } => *rate == 0.0 && static_potential(base),
        _ => true,
    }
}

fn validate_identity(id: IdentityId, prm: &IdentityParams, analytic: bool, has_geometry: bool) -> Result<(), String> {
    use IdentityId::*;
    let need = |v: Option<f64>, name: &str| {
        v.map(|_| ())
            .ok_or_else(|| format!("parameter `{name}` is required (set it on the task or in [exponents])"))
    };
    match id {
        EvolW_I | IneqW_I | IneqW_I_super => need(prm.beta, "beta")?,
        H_Identity_I | H_Ineq_I => {
            need(prm.s, "s")?;
            need(prm.q, "q")?;
        }
        H_Identity_II | H_Ineq_II => need(prm.s, "s")?,
        CothBound | CutoffLaplacian if !analytic => {
            return Err("this entry is evaluated on sample points: add an `analytic` block".into())
        }
        _ => {}
    }
    if analytic && !has_geometry {
        return Err("analytic sources need a [geometry] block".into());
    }
    Ok(())
}

fn validate_corollary(id: CorollaryId, p: f64, m: f64, prm: &MaxPrincipleParams) -> Result<(), String> {
    match id {
        CorollaryId::Cor6_4 | CorollaryId::Cor6_5 => {
            let q = prm.q.ok_or("parameter `q` is required")?;
            let (s, which) = match id {
                CorollaryId::Cor6_4 => (prm.s.unwrap_or(2.0), QCorollary::Cor6_4),
                _ => (2.0, QCorollary::Cor6_5),
            };
            let qi = exponents::q_admissible(p, m, s, which).map_err(|e| e.to_string())?;
            if !qi.admissible_interval.contains(q) {
                let iv = qi.admissible_interval;
                return Err(format!(
                    "q = {q} outside the admissible interval {}{}, {}{}",
                    if iv.lo_open { "(" } else { "[" },
                    iv.lo,
                    iv.hi,
                    if iv.hi_open { ")" } else { "]" }
                ));
            }
        }
        CorollaryId::Cor11_3 | CorollaryId::Cor11_4 => {
            if !exponents::regime_ii_admissible(p, m) {
                let (_, p0) = exponents::critical_exponents(m).map_err(|e| e.to_string())?;
                return Err(format!("needs p > p0 = {p0}"));
            }
            if prm.s.is_some_and(|s| s < 2.0) {
                return Err("s must be at least 2".into());
            }
        }
    }
    Ok(())
}

/// Domain midpoint, the default base point of synthesized tasks.
pub fn domain_center(domain: &Domain) -> f64 {
    match *domain {
        Domain::Circle { length } => 0.5 * length,
        Domain::Interval { x_lo, x_hi } => 0.5 * (x_lo + x_hi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
[exponents]
p = 0.75
m = 3
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(BASE).unwrap();
        assert_eq!(cfg.levels, 3);
        assert_eq!(cfg.nonlinearity, NonlinearitySpec::Zero);
        assert!(cfg.tasks.is_empty());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}\nbogus = 1\n");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
        let text = format!("{BASE}\n[[tasks]]\nkind = \"exponents\"\nextra = 2\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn json_and_toml_agree() {
        let cfg = parse_config(BASE).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&json).unwrap(), cfg);
    }

    #[test]
    fn preconditions_are_checked_up_front() {
        let text = format!("{BASE}\n[[tasks]]\nkind = \"solve\"\n");
        let err = parse_config(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("[geometry]"), "{err}");

        let text = format!("{BASE}\n[[tasks]]\nkind = \"max_principle\"\nid = \"Cor11_4\"\n");
        let cfg = parse_config(&text).unwrap();
        assert!(cfg.validate().is_err());

        let mut cfg = parse_config(BASE).unwrap();
        cfg.schema_version = 7;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn echo_resolves_defaults() {
        let text = format!("{BASE}\ns = 2.0\nq = 1.0\n");
        let mut cfg = parse_config(&text).unwrap();
        cfg.tasks.push(Task::MaxPrinciple { id: CorollaryId::Cor6_4, params: MaxPrincipleParams::default() });
        let echo = cfg.echo_for(&cfg.tasks[0]);
        match &echo.tasks[0] {
            Task::MaxPrinciple { params, .. } => {
                assert_eq!(params.q, Some(1.0));
                assert_eq!(params.s, Some(2.0));
            }
            _ => unreachable!(),
        }
        assert_eq!(echo.echo_for(&echo.tasks[0]), echo);
    }
}
