use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cbicl_core::branch_and_cut::ExactParams;
use cbicl_core::lowrank::{AlmParams, HeuristicParams};

#[derive(Debug, Parser)]
#[command(
    name = "cbicl",
    version,
    about = "Constrained biclustering as k densest disjoint bicliques"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted instance with sampled pairwise constraints.
    Generate(GenerateArgs),
    /// Solve an instance and write its solution and report.
    Solve(SolveArgs),
    /// Score a solution against ground-truth labels.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 0.25)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub ml_u: usize,
    #[arg(long, default_value_t = 0)]
    pub cl_u: usize,
    #[arg(long, default_value_t = 0)]
    pub ml_v: usize,
    #[arg(long, default_value_t = 0)]
    pub cl_v: usize,
    /// Fraction of constraints per side whose type is flipped.
    #[arg(long, default_value_t = 0.0)]
    pub violation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth sidecar; defaults to `<out>.truth`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Exact,
    Lowrank,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Exact)]
    pub engine: Engine,
    /// Overrides the number of clusters stored in the instance.
    #[arg(long)]
    pub k: Option<usize>,
    /// SOLUTION file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report file; holds every report line except `time_s`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Node events (exact) or restart and ALM iteration records (lowrank).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub sdp_tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub cp_stop_rel: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_separate: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_add: usize,
    /// Wall-clock limit of the exact engine in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_alm: f64,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Instance the solution belongs to; supplies k and the constraints.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

/// Validated solver settings of a `solve` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub engine: Engine,
    pub k_override: Option<usize>,
    pub exact: ExactParams,
    pub heuristic: HeuristicParams,
}

impl RunConfig {
    pub fn from_args(a: &SolveArgs) -> Result<Self, String> {
        for (name, v) in [
            ("gap-tol", a.gap_tol),
            ("sdp-tol", a.sdp_tol),
            ("cp-stop-rel", a.cp_stop_rel),
            ("eps-alm", a.eps_alm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("--{name} must be positive, got {v}"));
            }
        }
        if a.restarts == 0 || a.threads == 0 {
            return Err("--restarts and --threads must be at least 1".into());
        }
        if a.max_add == 0 {
            return Err("--max-add must be at least 1".into());
        }
        let time_limit = match a.time_limit {
            Some(t) if t > 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
            Some(t) => return Err(format!("--time-limit must be positive, got {t}")),
            None => None,
        };
        let exact = ExactParams {
            gap_tol: a.gap_tol,
            time_limit,
            seed: a.seed,
            sdp_tol: a.sdp_tol,
            cp_stop_rel: a.cp_stop_rel,
            max_separate: a.max_separate,
            max_add: a.max_add,
            threads: a.threads,
            ..ExactParams::default()
        };
        let heuristic = HeuristicParams {
            restarts: a.restarts,
            seed: a.seed,
            threads: a.threads,
            alm: AlmParams {
                eps: a.eps_alm,
                ..AlmParams::default()
            },
        };
        Ok(Self {
            engine: a.engine,
            k_override: a.k,
            exact,
            heuristic,
        })
    }
}
