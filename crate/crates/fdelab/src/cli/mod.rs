//! Config-driven orchestration behind the `fdelab` binary: config schema,
//! task execution, JSON/CSV reports and parameter sweeps.

pub mod config;
pub mod run;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::estimates::{CorollaryId, EstimateId, LiouvilleId, MaxPrincipleParams};
use crate::geometry::{Cylinder, Domain};
use crate::identities::{IdentityId, IdentityParams};

pub use config::{load_config, parse_config, RunConfig, Task};
pub use run::{execute_task, run_tasks, write_outcomes, TaskOutcome, TaskReport};
pub use sweep::{sweep, SweepAxis, SweepResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for usage or config problems.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Which tasks a subcommand runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    All,
    Exponents,
    Solve,
    Convergence,
    Identity { id: Option<IdentityId> },
    Estimate { id: Option<EstimateId>, radius: Option<f64> },
    MaxPrinciple { id: Option<CorollaryId> },
    Liouville { id: Option<LiouvilleId>, radii: Option<Vec<f64>> },
}

/// Keep the config's tasks that match the selection. If none match and
/// the selection is specific enough, synthesize a task with defaults.
pub fn select(cfg: &RunConfig, sel: &Selection) -> Result<RunConfig, CliError> {
    let keep = |t: &Task| match (sel, t) {
        (Selection::All, _) => true,
        (Selection::Exponents, Task::Exponents {}) => true,
        (Selection::Solve, Task::Solve {}) => true,
        (Selection::Convergence, Task::Convergence { .. }) => true,
        (Selection::Identity { id }, Task::Identity { id: tid, .. }) => id.map_or(true, |i| i == *tid),
        (Selection::Estimate { id, .. }, Task::Estimate { id: tid, .. }) => id.map_or(true, |i| i == *tid),
        (Selection::MaxPrinciple { id }, Task::MaxPrinciple { id: tid, .. }) => id.map_or(true, |i| i == *tid),
        (Selection::Liouville { id, .. }, Task::Liouville { id: tid, .. }) => id.map_or(true, |i| i == *tid),
        _ => false,
    };
    let mut tasks: Vec<Task> = cfg.tasks.iter().filter(|t| keep(t)).cloned().collect();
    // Command-line radii override the configured ones.
    if let Selection::Liouville { radii: Some(r), .. } = sel {
        for t in tasks.iter_mut() {
            if let Task::Liouville { radii, .. } = t {
                *radii = r.clone();
            }
        }
    }
    if let Selection::Estimate { radius: Some(r), .. } = sel {
        for t in tasks.iter_mut() {
            if let Task::Estimate { cylinder, .. } = t {
                cylinder.r = *r;
            }
        }
    }
    if tasks.is_empty() {
        if let Some(t) = synthesize(cfg, sel)? {
            tasks.push(t);
        }
    }
    Ok(RunConfig { tasks, ..cfg.clone() })
}

fn synthesize(cfg: &RunConfig, sel: &Selection) -> Result<Option<Task>, CliError> {
    let center = cfg.geometry.as_ref().map(|g| config::domain_center(&g.domain));
    let scn = cfg.scenario();
    let need_id = |what: &str| CliError::Config(format!("no {what} task in the config: pass --id"));
    Ok(match sel {
        Selection::All => None,
        Selection::Exponents => Some(Task::Exponents {}),
        Selection::Solve => Some(Task::Solve {}),
        Selection::Convergence => Some(Task::Convergence { levels: None }),
        Selection::Identity { id } => Some(Task::Identity {
            id: id.ok_or_else(|| need_id("identity"))?,
            params: IdentityParams::default(),
            analytic: None,
            levels: None,
        }),
        Selection::MaxPrinciple { id } => Some(Task::MaxPrinciple {
            id: id.ok_or_else(|| need_id("max_principle"))?,
            params: MaxPrincipleParams::default(),
        }),
        Selection::Estimate { id, radius } => {
            let id = id.ok_or_else(|| need_id("estimate"))?;
            let scn = scn.ok_or_else(|| CliError::Config("estimates need [geometry] and [solver] blocks".into()))?;
            let r = radius.unwrap_or(match scn.geometry.domain {
                Domain::Circle { length } => 0.25 * length,
                Domain::Interval { x_lo, x_hi } => 0.25 * (x_hi - x_lo),
            });
            Some(Task::Estimate {
                id,
                cylinder: Cylinder {
                    x0: center.unwrap_or(0.0),
                    t0: scn.t_end(),
                    r,
                    t_depth: scn.horizon,
                },
                levels: None,
            })
        }
        Selection::Liouville { id, radii } => Some(Task::Liouville {
            id: id.ok_or_else(|| need_id("liouville"))?,
            radii: radii.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]),
            x0: center.unwrap_or(0.0),
            ode: None,
        }),
    })
}
