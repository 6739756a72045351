use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use fdelab::cli::{self, CliError, RunConfig, Selection, SweepAxis};
use fdelab::estimates::{CorollaryId, EstimateId, LiouvilleId};
use fdelab::identities::IdentityId;

#[derive(Parser)]
#[command(name = "fdelab", version, about = "Gradient-estimate laboratory for weighted fast diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML or JSON config (a JSON report is accepted and re-run from its inputs).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Refinement levels for every study.
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponents, β data and q intervals.
    Exponents {
        #[command(flatten)]
        common: Common,
        /// p (without a config).
        #[arg(long)]
        p: Option<f64>,
        /// m (without a config).
        #[arg(long)]
        m: Option<f64>,
    },
    /// Solve the configured scenario and dump the field.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Residuals of an identity or inequality entry.
    CheckIdentity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_identity)]
        id: Option<IdentityId>,
    },
    /// Calibrated constant of a gradient estimate.
    VerifyEstimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_estimate)]
        id: Option<EstimateId>,
        /// Cylinder radius (overrides the config).
        #[arg(long)]
        radius: Option<f64>,
    },
    /// A maximum-principle corollary on a closed geometry.
    MaxPrinciple {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_corollary)]
        id: Option<CorollaryId>,
    },
    /// Liouville probe: R-sweep of the static bound and backward ODE.
    Liouville {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_liouville)]
        id: Option<LiouvilleId>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Solver convergence study.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Run the config template over values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// p, m, beta, r, dx, lambda_rate or f_amplitude.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Run every task of the config.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_identity(s: &str) -> Result<IdentityId, String> {
    IdentityId::parse(s).ok_or_else(|| format!("unknown identity `{s}`"))
}

fn parse_estimate(s: &str) -> Result<EstimateId, String> {
    EstimateId::parse(s).ok_or_else(|| format!("unknown estimate `{s}`"))
}

fn parse_corollary(s: &str) -> Result<CorollaryId, String> {
    CorollaryId::parse(s).ok_or_else(|| format!("unknown corollary `{s}`"))
}

fn parse_liouville(s: &str) -> Result<LiouvilleId, String> {
    LiouvilleId::parse(s).ok_or_else(|| format!("unknown Liouville theorem `{s}`"))
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = cli::load_config(path)?;
    apply_overrides(&mut cfg, common);
    Ok(cfg)
}

fn apply_overrides(cfg: &mut RunConfig, common: &Common) {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(levels) = common.levels {
        cfg.levels = levels;
        for t in cfg.tasks.iter_mut() {
            match t {
                cli::Task::Convergence { levels: l }
                | cli::Task::Identity { levels: l, .. }
                | cli::Task::Estimate { levels: l, .. } => *l = Some(levels),
                _ => {}
            }
        }
    }
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("fdelab-out"))
}

enum Outcome {
    Pass,
    Fail,
}

fn run_selection(common: &Common, cfg: RunConfig, sel: Selection) -> Result<Outcome> {
    let cfg = cli::select(&cfg, &sel)?;
    cfg.validate()?;
    let outcomes = cli::run_tasks(&cfg);
    let dir = out_dir(common, &cfg);
    let paths = cli::write_outcomes(&dir, &outcomes)?;
    let mut all = true;
    for (o, path) in outcomes.iter().zip(&paths) {
        let r = &o.report;
        all &= r.pass;
        let status = if r.pass { "PASS" } else { "FAIL" };
        match &r.error {
            Some(e) => println!("{status} {} -> {} ({e})", r.id, path.display()),
            None => println!("{status} {} -> {}", r.id, path.display()),
        }
    }
    Ok(if all { Outcome::Pass } else { Outcome::Fail })
}

fn run_sweep(common: &Common, axis: &str, values: &[f64]) -> Result<Outcome> {
    let axis: SweepAxis = axis.parse()?;
    let cfg = load(common)?;
    // The template must be a valid config in its own right.
    cfg.validate()?;
    let res = cli::sweep(&cfg, axis, values);
    let dir = out_dir(common, &cfg);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("sweep.csv");
    std::fs::write(&path, res.to_csv(axis)).with_context(|| format!("writing {}", path.display()))?;
    println!("{} rows -> {}", res.rows.len(), path.display());
    Ok(if res.all_pass() { Outcome::Pass } else { Outcome::Fail })
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Exponents { common, p, m } => {
            let cfg = match (&common.config, p, m) {
                (None, Some(p), Some(m)) => {
                    let mut cfg = RunConfig::exponents_only(p, m);
                    apply_overrides(&mut cfg, &common);
                    cfg
                }
                (None, _, _) => return Err(CliError::Config("pass --config or both --p and --m".into()).into()),
                (Some(_), _, _) => load(&common)?,
            };
            run_selection(&common, cfg, Selection::Exponents)
        }
        Command::Solve { common } => run_selection(&common, load(&common)?, Selection::Solve),
        Command::Convergence { common } => run_selection(&common, load(&common)?, Selection::Convergence),
        Command::CheckIdentity { common, id } => run_selection(&common, load(&common)?, Selection::Identity { id }),
        Command::VerifyEstimate { common, id, radius } => {
            run_selection(&common, load(&common)?, Selection::Estimate { id, radius })
        }
        Command::MaxPrinciple { common, id } => run_selection(&common, load(&common)?, Selection::MaxPrinciple { id }),
        Command::Liouville { common, id, radii } => {
            run_selection(&common, load(&common)?, Selection::Liouville { id, radii })
        }
        Command::Sweep { common, axis, values } => run_sweep(&common, &axis, &values),
        Command::Run { common } => run_selection(&common, load(&common)?, Selection::All),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(2, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
