use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cbicl_core::branch_and_cut::{solve_exact, Termination};
use cbicl_core::evalgen::{ari, generate_planted, nmi, sample_constraints, ConstraintQuotas};
use cbicl_core::format::{
    parse_instance, parse_solution, serialize_instance, serialize_solution, SolutionFile,
};
use cbicl_core::lowrank::heuristic_solve_logged;
use cbicl_core::{check_feasible, Error, Instance};

use crate::config::{Cli, Command, Engine, EvalArgs, GenerateArgs, RunConfig, SolveArgs};
use crate::truth;

#[derive(Debug)]
pub enum Failure {
    BadInput(String),
    Infeasible(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::BadInput(_) => ExitCode::from(1),
            Failure::Infeasible(_) => ExitCode::from(2),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::BadInput(m) => write!(f, "{m}"),
            Failure::Infeasible(m) => write!(f, "infeasible: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(r) => Failure::Infeasible(r.to_string()),
            other => Failure::BadInput(other.to_string()),
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Solve(a) => solve(&a),
        Command::Eval(a) => eval(&a),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::BadInput(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::BadInput(format!("cannot write {}: {e}", path.display())))
}

/// Ordered `key=value` lines.
#[derive(Default)]
struct Report(Vec<(&'static str, String)>);

impl Report {
    fn push(&mut self, key: &'static str, value: impl fmt::Display) {
        self.0.push((key, value.to_string()));
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

fn generate(a: &GenerateArgs) -> Result<ExitCode, Failure> {
    let planted = generate_planted(a.n, a.m, a.k, a.noise, a.seed)?;
    let quotas = ConstraintQuotas {
        ml_u: a.ml_u,
        cl_u: a.cl_u,
        ml_v: a.ml_v,
        cl_v: a.cl_v,
    };
    let constraints = sample_constraints(
        &planted.row_truth,
        &planted.col_truth,
        quotas,
        a.violation,
        a.seed,
    )?;
    let inst = Instance::new(planted.weights, constraints, a.k)?;
    write(&a.out, &serialize_instance(&inst))?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".truth");
        PathBuf::from(p)
    });
    write(
        &truth_path,
        &truth::serialize(&planted.row_truth, &planted.col_truth),
    )?;
    println!("instance={}", a.out.display());
    println!("truth={}", truth_path.display());
    Ok(ExitCode::SUCCESS)
}

fn solve(a: &SolveArgs) -> Result<ExitCode, Failure> {
    let cfg = RunConfig::from_args(a).map_err(Failure::BadInput)?;
    let inst = parse_instance(&read(&a.instance)?)?;
    let k = cfg.k_override.unwrap_or(inst.k);
    let start = Instant::now();
    let mut report = Report::default();
    let mut log = String::new();
    let outcome = match cfg.engine {
        Engine::Exact => solve_exact(&inst.weights, &inst.constraints, k, &cfg.exact).map(|r| {
            for e in &r.events {
                log.push_str(&format!("{e}\n"));
            }
            let status = match r.termination {
                Termination::GapClosed => "optimal",
                Termination::TimeLimit => "time_limit",
                Termination::NodeLimit => "node_limit",
                Termination::Heuristic => "heuristic",
            };
            report.push("status", status);
            report.push("objective", float(r.lb));
            report.push("ub", float(r.ub));
            report.push("gap", float(r.gap));
            report.push("nodes", r.nodes);
            report.push("root_gap", float(r.root_gap));
            report.push("cp_rounds", r.root_cut_rounds);
            r
        }),
        Engine::Lowrank => heuristic_solve_logged(&inst.weights, &inst.constraints, k, &cfg.heuristic).map(|(r, runs)| {
            for run in &runs {
                let objective = run.objective.map_or_else(|| "none".to_string(), float);
                log.push_str(&format!(
                    "restart={} seed={} rank={} init_scale={} alm_iterations={} converged={} criterion={} objective={}\n",
                    run.restart,
                    run.seed,
                    run.rank,
                    float(run.init_scale),
                    run.alm_iterations,
                    run.converged,
                    float(run.criterion),
                    objective
                ));
                for it in &run.iterations {
                    log.push_str(&format!(
                        "  alm iteration={} beta={} residual={} stationarity={} inner_eps={} sub_outer={} sub_inner={}\n",
                        it.iteration,
                        float(it.beta),
                        float(it.residual),
                        float(it.stationarity),
                        float(it.inner_eps),
                        it.subproblem_outer,
                        it.subproblem_inner
                    ));
                }
            }
            report.push("status", "heuristic");
            report.push("objective", float(r.lb));
            report.push("restarts", runs.len());
            report.push("converged_restarts", runs.iter().filter(|r| r.converged).count());
            r
        }),
    };
    let result = match outcome {
        Ok(r) => r,
        Err(Error::Infeasible(reason)) => {
            report.push("status", "infeasible");
            report.push("reason", &reason);
            finish(a, &report, &log, start)?;
            return Err(Failure::Infeasible(reason.to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.out {
        write(
            path,
            &serialize_solution(&SolutionFile::from_biclustering(&result.best, result.lb)),
        )?;
    }
    finish(a, &report, &log, start)?;
    Ok(if result.termination == Termination::TimeLimit {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn finish(a: &SolveArgs, report: &Report, log: &str, start: Instant) -> Result<(), Failure> {
    if let Some(path) = &a.report {
        write(path, &report.render())?;
    }
    if let Some(path) = &a.log {
        write(path, log)?;
    }
    print!("{}", report.render());
    println!("time_s={:.3}", start.elapsed().as_secs_f64());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<ExitCode, Failure> {
    let inst = parse_instance(&read(&a.instance)?)?;
    let sol = parse_solution(&read(&a.solution)?)?;
    let truth = truth::parse(&read(&a.truth)?).map_err(Failure::BadInput)?;
    let (n, m) = (inst.weights.n(), inst.weights.m());
    for (what, len, want) in [
        ("solution rows", sol.rows.len(), n),
        ("solution cols", sol.cols.len(), m),
        ("truth rows", truth.rows.len(), n),
        ("truth cols", truth.cols.len(), m),
    ] {
        if len != want {
            return Err(Failure::BadInput(format!(
                "{what}: {len} labels, instance has {want}"
            )));
        }
    }
    let feasible = sol
        .to_biclustering(inst.k)
        .is_ok_and(|b| check_feasible(&b, &inst.constraints));
    let mut report = Report::default();
    report.push("ari_rows", float(ari(&sol.rows, &truth.rows)?));
    report.push("nmi_rows", float(nmi(&sol.rows, &truth.rows)?));
    report.push("ari_cols", float(ari(&sol.cols, &truth.cols)?));
    report.push("nmi_cols", float(nmi(&sol.cols, &truth.cols)?));
    report.push("feasible", feasible);
    print!("{}", report.render());
    Ok(ExitCode::SUCCESS)
}
