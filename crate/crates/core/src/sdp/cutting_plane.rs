use crate::error::Result;
use crate::numerics::SymMatrix;

use super::admm::{solve_dnn_with, AdmmState, DnnParams, DnnSolution, DnnStop};
use super::cuts::{purge_inactive, separate_cuts, SeparationParams};
use super::relaxation::{CutPool, DnnRelaxation};

#[derive(Debug, Clone)]
pub struct CuttingPlaneParams {
    /// Stop once a round improves the best bound by at most this fraction.
    pub stop_rel: f64,
    pub slack_tol: f64,
    pub max_rounds: usize,
    pub separation: SeparationParams,
    pub dnn: DnnParams,
}

impl Default for CuttingPlaneParams {
    fn default() -> Self {
        Self {
            stop_rel: 1e-3,
            slack_tol: 1e-5,
            max_rounds: 50,
            separation: SeparationParams::default(),
            dnn: DnnParams::default(),
        }
    }
}

/// What the caller sees after each solve.
#[derive(Debug)]
pub struct RoundInfo<'a> {
    /// 1-based.
    pub round: usize,
    pub ub: f64,
    pub best_ub: f64,
    pub solution: &'a DnnSolution,
    pub pool_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundControl {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuttingPlaneStop {
    NoViolatedCuts,
    SmallImprovement,
    RoundLimit,
    Pruned,
    Deadline,
    Caller,
}

#[derive(Debug, Clone)]
pub struct CuttingPlaneOutcome {
    /// Smallest certified bound over all rounds.
    pub ub: f64,
    /// Primal estimate of the last round.
    pub z: SymMatrix,
    /// Pool after the last purge, plus any cuts separated from the last round.
    pub pool: CutPool,
    pub rounds: usize,
    pub ub_history: Vec<f64>,
    pub cuts_added: usize,
    /// Whether every inner solve met its tolerance.
    pub all_converged: bool,
    pub stop: CuttingPlaneStop,
}

/// Alternates relaxation solves with cut purging and separation.
pub fn cutting_plane_bound(
    rel: DnnRelaxation,
    params: &CuttingPlaneParams,
) -> Result<CuttingPlaneOutcome> {
    cutting_plane_bound_with(rel, params, |_| RoundControl::Continue)
}

/// As [`cutting_plane_bound`], consulting `on_round` after every solve.
pub fn cutting_plane_bound_with(
    mut rel: DnnRelaxation,
    params: &CuttingPlaneParams,
    mut on_round: impl FnMut(&RoundInfo<'_>) -> RoundControl,
) -> Result<CuttingPlaneOutcome> {
    let mut state: Option<AdmmState> = None;
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut cuts_added = 0;
    let mut all_converged = true;
    let mut round = 0;
    loop {
        round += 1;
        let (sol, st) = solve_dnn_with(&rel, &params.dnn, state.as_ref())?;
        state = Some(st);
        all_converged &= sol.converged();
        history.push(sol.ub);
        let prev_best = best;
        best = best.min(sol.ub);
        let info = RoundInfo {
            round,
            ub: sol.ub,
            best_ub: best,
            solution: &sol,
            pool_size: rel.cuts.len(),
        };
        let control = on_round(&info);

        let mut stop = match sol.stop {
            DnnStop::Pruned => Some(CuttingPlaneStop::Pruned),
            DnnStop::Deadline => Some(CuttingPlaneStop::Deadline),
            _ => None,
        };
        if stop.is_none() && control == RoundControl::Stop {
            stop = Some(CuttingPlaneStop::Caller);
        }
        if stop.is_none() && round > 1 && prev_best - sol.ub <= params.stop_rel * prev_best.abs() {
            stop = Some(CuttingPlaneStop::SmallImprovement);
        }
        rel.cuts = purge_inactive(&rel.cuts, &sol.z, rel.n_bar(), params.slack_tol);
        if stop.is_none() {
            let sep = SeparationParams {
                seed: params.separation.seed.wrapping_add(round as u64),
                ..params.separation
            };
            let new = separate_cuts(&sol.z, &rel, &sep);
            if new.is_empty() {
                stop = Some(CuttingPlaneStop::NoViolatedCuts);
            } else {
                cuts_added += new.len();
                for c in new {
                    rel.cuts.insert(c);
                }
                if round >= params.max_rounds {
                    stop = Some(CuttingPlaneStop::RoundLimit);
                }
            }
        }
        if let Some(stop) = stop {
            return Ok(CuttingPlaneOutcome {
                ub: best,
                z: sol.z,
                pool: rel.cuts,
                rounds: round,
                ub_history: history,
                cuts_added,
                all_converged,
                stop,
            });
        }
    }
}
