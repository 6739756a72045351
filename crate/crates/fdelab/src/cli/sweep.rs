//! Parameter sweeps over a config template.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exponents::BetaPolicy;
use crate::geometry::{Domain, Lambda, Potential};

use super::config::{RunConfig, Task};
use super::run::run_tasks;
use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    P,
    M,
    Beta,
    R,
    Dx,
    LambdaRate,
    FAmplitude,
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "p" => SweepAxis::P,
            "m" => SweepAxis::M,
            "beta" => SweepAxis::Beta,
            "r" => SweepAxis::R,
            "dx" => SweepAxis::Dx,
            "lambda_rate" => SweepAxis::LambdaRate,
            "f_amplitude" => SweepAxis::FAmplitude,
            other => {
                return Err(CliError::Config(format!(
                    "unknown sweep axis `{other}` (expected p, m, beta, r, dx, lambda_rate, f_amplitude)"
                )))
            }
        })
    }
}

fn scale_potential(pot: &mut Potential, value: f64) -> bool {
    match pot {
        Potential::Quadratic { a } | Potential::Cosine { a, .. } => {
            *a = value;
            true
        }
        Potential::TimeScaled { base, .. } => scale_potential(base, value),
        Potential::Zero => false,
    }
}

/// The template with one axis set to `value`.
pub fn instantiate(template: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig, CliError> {
    let mut cfg = template.clone();
    let missing = |what: &str| CliError::Config(format!("axis {axis:?} needs a {what}"));
    match axis {
        SweepAxis::P => cfg.exponents.p = value,
        SweepAxis::M => {
            cfg.exponents.m = value;
            if let Some(g) = cfg.geometry.as_mut() {
                g.m = value;
            }
        }
        SweepAxis::Beta => cfg.exponents.beta = BetaPolicy::Explicit { beta: value },
        SweepAxis::R => {
            let mut any = false;
            for t in cfg.tasks.iter_mut() {
                if let Task::Estimate { cylinder, .. } | Task::Cutoff { cylinder, .. } = t {
                    cylinder.r = value;
                    any = true;
                }
            }
            if !any {
                return Err(missing("task with a cylinder"));
            }
        }
        SweepAxis::Dx => {
            let geom = cfg.geometry.as_ref().ok_or_else(|| missing("geometry"))?;
            let solver = cfg.solver.as_mut().ok_or_else(|| missing("solver block"))?;
            if !(value > 0.0) {
                return Err(CliError::Config(format!("dx = {value} must be positive")));
            }
            solver.nx = match geom.domain {
                Domain::Circle { length } => (length / value).round() as usize,
                Domain::Interval { x_lo, x_hi } => ((x_hi - x_lo) / value).round() as usize + 1,
            };
        }
        SweepAxis::LambdaRate => {
            let g = cfg.geometry.as_mut().ok_or_else(|| missing("geometry"))?;
            let lambda0 = match g.lambda {
                Lambda::Constant { lambda0 } | Lambda::Linear { lambda0, .. } => lambda0,
            };
            g.lambda = Lambda::Linear { lambda0, rate: value };
        }
        SweepAxis::FAmplitude => {
            let g = cfg.geometry.as_mut().ok_or_else(|| missing("geometry"))?;
            if !scale_potential(&mut g.potential, value) {
                return Err(missing("potential with an amplitude"));
            }
        }
    }
    Ok(cfg)
}

/// One aggregate row per (value, task).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub task: String,
    pub pass: bool,
    pub stats: Vec<(String, f64)>,
    pub error: Option<String>,
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// CSV with columns value, task, pass, the union of the statistics in
    /// order of first appearance, and error.
    pub fn to_csv(&self, axis: SweepAxis) -> String {
        let mut keys: Vec<String> = Vec::new();
        for row in &self.rows {
            for (k, _) in &row.stats {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        let axis_name = serde_json::to_value(axis).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let mut out = format!("{axis_name},task,pass");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push_str(",error\n");
        for row in &self.rows {
            out.push_str(&format!("{:e},{},{}", row.value, row.task, row.pass));
            for k in &keys {
                out.push(',');
                if let Some((_, v)) = row.stats.iter().find(|(name, _)| name == k) {
                    out.push_str(&format!("{v:e}"));
                }
            }
            out.push(',');
            if let Some(e) = &row.error {
                out.push('"');
                out.push_str(&e.replace('"', "'"));
                out.push('"');
            }
            out.push('\n');
        }
        out
    }
}

/// Observed order of a residual between consecutive Δx rows of the same
/// task.
fn add_orders(rows: &mut [SweepRow]) {
    let tasks: Vec<String> = rows.iter().map(|r| r.task.clone()).collect();
    for task in tasks.iter() {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| &rows[i].task == task).collect();
        for w in idx.windows(2) {
            let (a, b) = (w[0], w[1]);
            let res = |i: usize| rows[i].stats.iter().find(|(k, _)| k == "residual").map(|(_, v)| *v);
            if let (Some(ra), Some(rb)) = (res(a), res(b)) {
                let order = (ra / rb).ln() / (rows[a].value / rows[b].value).ln();
                if !rows[b].stats.iter().any(|(k, _)| k == "observed_order") {
                    rows[b].stats.push(("observed_order".into(), order));
                }
            }
        }
    }
}

/// Run the template at every value. A value whose instantiation fails
/// validation produces an error row; the other rows still run.
pub fn sweep(template: &RunConfig, axis: SweepAxis, values: &[f64]) -> SweepResult {
    let per_value: Vec<Vec<SweepRow>> = values
        .par_iter()
        .map(|&value| {
            let cfg = match instantiate(template, axis, value).and_then(|c| c.validate().map(|_| c)) {
                Ok(c) => c,
                Err(e) => {
                    return vec![SweepRow {
                        value,
                        task: "config".into(),
                        pass: false,
                        stats: Vec::new(),
                        error: Some(e.to_string()),
                    }]
                }
            };
            run_tasks(&cfg)
                .into_iter()
                .map(|o| SweepRow {
                    value,
                    task: o.report.id.clone(),
                    pass: o.report.pass,
                    stats: o.headline,
                    error: o.report.error,
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<SweepRow> = per_value.into_iter().flatten().collect();
    if axis == SweepAxis::Dx {
        add_orders(&mut rows);
    }
    SweepResult { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;

    fn template() -> RunConfig {
        parse_config("schema_version = 1\n[exponents]\np = 0.75\nm = 3\n[[tasks]]\nkind = \"exponents\"\n").unwrap()
    }

    #[test]
    fn m_sweep_gives_p0_column() {
        let res = sweep(&template(), SweepAxis::M, &[2.0, 4.0, 5.0, 10.0]);
        let p0: Vec<f64> = res
            .rows
            .iter()
            .map(|r| r.stats.iter().find(|(k, _)| k == "p_0").unwrap().1)
            .collect();
        assert_eq!(p0[..3], [0.5, 0.5, 0.5]);
        assert!((p0[3] - 2.0 / 3.0).abs() < 1e-15);
        let csv = res.to_csv(SweepAxis::M);
        assert!(csv.lines().next().unwrap().contains("p_0"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let res = sweep(&template(), SweepAxis::P, &[]);
        assert_eq!(res.to_csv(SweepAxis::P), "p,task,pass,error\n");
    }

    #[test]
    fn bad_value_aborts_only_its_row() {
        let res = sweep(&template(), SweepAxis::M, &[1.0, 4.0]);
        assert!(!res.rows[0].pass && res.rows[0].error.is_some());
        assert!(res.rows[1].pass);
    }

    #[test]
    fn axis_names_parse() {
        assert_eq!("lambda_rate".parse::<SweepAxis>().unwrap(), SweepAxis::LambdaRate);
        assert!("nope".parse::<SweepAxis>().is_err());
    }
}
