//! Best-first branch-and-cut with relaxation bounds.
//!
//! Each node is an aggregated instance with the must-links and cannot-links
//! added by branching. Nodes are bounded by the cutting-plane loop, rounded
//! for incumbents, and split on the most ambiguous vertex pair into a
//! must-link child and a cannot-link child.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{Error, InfeasibleReport, Result};
use crate::model::{check_feasible, Biclustering, PairwiseConstraints, Side, WeightMatrix};
use crate::numerics::SymMatrix;
use crate::preprocess::{aggregate, merge_components, AggregatedInstance};
use crate::rounding::round_solution;
use crate::sdp::{
    cutting_plane_bound_with, CutPool, CuttingPlaneParams, DnnParams, DnnRelaxation, RoundControl,
    SeparationParams,
};

#[derive(Debug, Clone)]
pub struct ExactParams {
    /// Relative gap `(UB − LB)/UB` at which the search stops.
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub seed: u64,
    pub sdp_tol: f64,
    pub sdp_max_iter: usize,
    pub cp_stop_rel: f64,
    pub max_separate: usize,
    pub max_add: usize,
    /// Nodes bounded concurrently per batch.
    pub threads: usize,
    pub max_nodes: Option<usize>,
}

impl Default for ExactParams {
    fn default() -> Self {
        Self {
            gap_tol: 1e-3,
            time_limit: None,
            seed: 0,
            sdp_tol: 1e-4,
            sdp_max_iter: 5000,
            cp_stop_rel: 1e-3,
            max_separate: 100_000,
            max_add: 10_000,
            threads: 1,
            max_nodes: None,
        }
    }
}

impl ExactParams {
    fn validate(&self) -> Result<()> {
        if !(self.gap_tol >= 0.0) || !(self.sdp_tol > 0.0) || !(self.cp_stop_rel >= 0.0) {
            return Err(Error::InvalidArgument(
                "tolerances must be nonnegative (sdp_tol positive)".into(),
            ));
        }
        if self.threads == 0 || self.sdp_max_iter == 0 {
            return Err(Error::InvalidArgument(
                "threads and sdp_max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOutcome {
    Pruned,
    Branched,
    /// No pair left to branch on.
    Leaf,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct NodeEvent {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Certified bound from this node's cutting-plane loop.
    pub safe_ub: f64,
    /// `min(parent bound, safe_ub)`.
    pub ub: f64,
    /// Best rounded objective found at this node.
    pub node_lb: Option<f64>,
    /// Global lower bound after this node.
    pub lb: f64,
    pub cut_rounds: usize,
    pub cuts_added: usize,
    pub branch: Option<(Side, usize, usize)>,
    pub outcome: NodeOutcome,
    /// Original-level constraints defining the node's subproblem.
    pub constraints: PairwiseConstraints,
}

impl fmt::Display for NodeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node={} depth={} ub={:.9} lb={:.9} rounds={} cuts_added={} outcome={:?}",
            self.id, self.depth, self.ub, self.lb, self.cut_rounds, self.cuts_added, self.outcome
        )?;
        if let Some((side, i, j)) = self.branch {
            write!(f, " branch={side}:{}-{}", i + 1, j + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GapClosed,
    TimeLimit,
    NodeLimit,
    /// All restarts of the low-rank heuristic finished; nothing is certified.
    Heuristic,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Incumbent in the original index space.
    pub best: Biclustering,
    pub lb: f64,
    /// Certified bound; NaN for heuristic results.
    pub ub: f64,
    pub gap: f64,
    pub nodes: usize,
    pub root_gap: f64,
    pub root_cut_rounds: usize,
    pub wall_time: Duration,
    pub termination: Termination,
    pub events: Vec<NodeEvent>,
}

/// `(UB − LB)/|UB|`, zero when both vanish.
pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if ub == lb {
        0.0
    } else {
        (ub - lb) / ub.abs().max(f64::MIN_POSITIVE)
    }
}

/// The unconstrained pair with the largest ambiguity score
/// `dim · min(Z_ij, Z_ii − Z_ij)`, U side first, then lexicographic.
pub fn select_branching_pair(
    z: &SymMatrix,
    agg: &AggregatedInstance,
) -> Option<(Side, usize, usize)> {
    let mut best: Option<(f64, Side, usize, usize)> = None;
    for side in [Side::U, Side::V] {
        let n = agg.dim(side);
        let off = if side == Side::U { 0 } else { agg.n_bar() };
        let cl = agg.cannot_links(side);
        for i in 0..n {
            for j in i + 1..n {
                if cl.contains(&(i, j)) {
                    continue;
                }
                let zij = z[(off + i, off + j)];
                let score = n as f64 * zij.min(z[(off + i, off + i)] - zij);
                if best.is_none_or(|(b, ..)| score > b) {
                    best = Some((score, side, i, j));
                }
            }
        }
    }
    best.map(|(_, s, i, j)| (s, i, j))
}

struct Node {
    id: usize,
    parent: Option<usize>,
    agg: AggregatedInstance,
    cuts: CutPool,
    parent_ub: f64,
    depth: usize,
    seed: u64,
}

struct Queued {
    ub: f64,
    seq: usize,
    node: Node,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Max-heap: larger bound first, then earlier insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        self.ub.total_cmp(&other.ub).then(other.seq.cmp(&self.seq))
    }
}

struct Bounded {
    safe_ub: f64,
    z: SymMatrix,
    pool: CutPool,
    rounds: usize,
    cuts_added: usize,
    incumbent: Option<(Biclustering, f64)>,
    infeasible: Option<InfeasibleReport>,
}

fn node_seed(master: u64, id: usize) -> u64 {
    master ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn prunable(ub: f64, lb: f64, gap_tol: f64) -> bool {
    ub - lb <= gap_tol * lb.abs()
}

fn bound_node(
    node: &Node,
    lb: f64,
    params: &ExactParams,
    deadline: Option<Instant>,
) -> Result<Bounded> {
    let rel = DnnRelaxation::with_cuts(node.agg.clone(), node.cuts.clone())?;
    let prune_below = (lb > f64::NEG_INFINITY).then(|| lb + params.gap_tol * lb.abs());
    let cp = CuttingPlaneParams {
        stop_rel: params.cp_stop_rel,
        separation: SeparationParams {
            max_separate: params.max_separate,
            max_add: params.max_add,
            seed: node.seed,
        },
        dnn: DnnParams {
            tol: params.sdp_tol,
            max_iter: params.sdp_max_iter,
            prune_below,
            deadline,
            ..DnnParams::default()
        },
        ..CuttingPlaneParams::default()
    };
    let mut incumbent: Option<(Biclustering, f64)> = None;
    let mut infeasible = None;
    let mut failure: Option<Error> = None;
    let out = cutting_plane_bound_with(rel, &cp, |info| {
        match round_solution(
            &info.solution.z,
            &node.agg,
            node.seed.wrapping_add(info.round as u64),
        ) {
            Ok((sol, obj)) => {
                if incumbent.as_ref().is_none_or(|(_, b)| obj > *b) {
                    incumbent = Some((sol, obj));
                }
            }
            Err(Error::Infeasible(r)) => {
                infeasible = Some(r);
                return RoundControl::Stop;
            }
            Err(e) => {
                failure = Some(e);
                return RoundControl::Stop;
            }
        }
        let best_lb = incumbent.as_ref().map_or(lb, |(_, o)| o.max(lb));
        if prunable(info.best_ub.min(node.parent_ub), best_lb, params.gap_tol) {
            RoundControl::Stop
        } else {
            RoundControl::Continue
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Bounded {
        safe_ub: out.ub,
        z: out.z,
        pool: out.pool,
        rounds: out.rounds,
        cuts_added: out.cuts_added,
        incumbent,
        infeasible,
    })
}

/// Exact solver: returns a biclustering within `gap_tol` of optimal unless a
/// time or node limit interrupts the search.
pub fn solve_exact(
    a: &WeightMatrix,
    con: &PairwiseConstraints,
    k: usize,
    params: &ExactParams,
) -> Result<SolverResult> {
    params.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    con.validate(a.n(), a.m())?;
    let start = Instant::now();
    let deadline = params.time_limit.map(|t| start + t);
    let root_agg = aggregate(a, con, k).map_err(Error::Infeasible)?;

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut next_id = 1;
    heap.push(Queued {
        ub: f64::INFINITY,
        seq,
        node: Node {
            id: 0,
            parent: None,
            agg: root_agg,
            cuts: CutPool::new(),
            parent_ub: f64::INFINITY,
            depth: 0,
            seed: node_seed(params.seed, 0),
        },
    });
    let mut best: Option<(Biclustering, f64)> = None;
    let mut lb = f64::NEG_INFINITY;
    // Largest bound among closed nodes; together with the open bounds it
    // certifies the reported UB.
    let mut closed_ub = f64::NEG_INFINITY;
    let mut events: Vec<NodeEvent> = Vec::new();
    let mut nodes = 0;
    let mut root: Option<(f64, usize)> = None;
    let mut termination = Termination::GapClosed;
    let mut root_infeasible: Option<InfeasibleReport> = None;

    loop {
        let open_ub = heap.peek().map_or(f64::NEG_INFINITY, |q| q.ub);
        if heap.is_empty()
            || (best.is_some()
                && relative_gap(open_ub.max(closed_ub).max(lb), lb) <= params.gap_tol)
        {
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) && best.is_some() {
            termination = Termination::TimeLimit;
            break;
        }
        if params.max_nodes.is_some_and(|cap| nodes >= cap) && best.is_some() {
            termination = Termination::NodeLimit;
            break;
        }
        let mut batch = Vec::new();
        while batch.len() < params.threads {
            let Some(q) = heap.pop() else { break };
            if best.is_some() && prunable(q.ub, lb, params.gap_tol) {
                closed_ub = closed_ub.max(q.ub);
                continue;
            }
            batch.push(q.node);
        }
        if batch.is_empty() {
            continue;
        }
        let results: Vec<Result<Bounded>> = if batch.len() == 1 {
            vec![bound_node(&batch[0], lb, params, deadline)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .iter()
                    .map(|n| s.spawn(move || bound_node(n, lb, params, deadline)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("bounding thread panicked"))
                    .collect()
            })
        };
        for (node, res) in batch.into_iter().zip(results) {
            let res = res?;
            nodes += 1;
            let ub = res.safe_ub.min(node.parent_ub);
            let node_lb = res.incumbent.as_ref().map(|(_, o)| *o);
            if let Some((sol, obj)) = res.incumbent {
                assert!(
                    check_feasible(&sol, con),
                    "incumbent violates the instance constraints"
                );
                if best.as_ref().is_none_or(|(_, b)| obj > *b) {
                    lb = obj;
                    best = Some((sol, obj));
                }
            }
            let mut event = NodeEvent {
                id: node.id,
                parent: node.parent,
                depth: node.depth,
                safe_ub: res.safe_ub,
                ub,
                node_lb,
                lb,
                cut_rounds: res.rounds,
                cuts_added: res.cuts_added,
                branch: None,
                outcome: NodeOutcome::Pruned,
                constraints: node.agg.base_constraints().clone(),
            };
            if node.id == 0 {
                root = Some((ub, res.rounds));
            }
            if let Some(r) = res.infeasible {
                event.outcome = NodeOutcome::Infeasible;
                if node.id == 0 {
                    root_infeasible = Some(r);
                }
            } else if best.is_some() && prunable(ub, lb, params.gap_tol) {
                event.outcome = NodeOutcome::Pruned;
                closed_ub = closed_ub.max(ub);
            } else if let Some((side, i, j)) = select_branching_pair(&res.z, &node.agg) {
                event.outcome = NodeOutcome::Branched;
                event.branch = Some((side, i, j));
                let mut children = Vec::with_capacity(2);
                if let Ok(merge) = merge_components(&node.agg, side, i, j) {
                    let cuts = res.pool.remapped(side, &merge.remap);
                    children.push((merge.agg, cuts));
                }
                children.push((node.agg.with_cannot_link(side, i, j)?, res.pool.clone()));
                for (agg, cuts) in children {
                    seq += 1;
                    heap.push(Queued {
                        ub,
                        seq,
                        node: Node {
                            id: next_id,
                            parent: Some(node.id),
                            agg,
                            cuts,
                            parent_ub: ub,
                            depth: node.depth + 1,
                            seed: node_seed(params.seed, next_id),
                        },
                    });
                    next_id += 1;
                }
            } else {
                event.outcome = NodeOutcome::Leaf;
                // Every pair is fixed, so the rounded labeling is the node optimum.
                closed_ub = closed_ub.max(node_lb.unwrap_or(ub));
            }
            events.push(event);
        }
    }

    let (sol, obj) = best.ok_or_else(|| {
        Error::Infeasible(root_infeasible.unwrap_or(InfeasibleReport::NoColoring { side: Side::U }))
    })?;
    let open_ub = heap.iter().map(|q| q.ub).fold(f64::NEG_INFINITY, f64::max);
    let ub = open_ub.max(closed_ub).max(obj);
    let (root_ub, root_rounds) = root.expect("root processed");
    Ok(SolverResult {
        best: sol,
        lb: obj,
        ub,
        gap: relative_gap(ub, obj),
        nodes,
        root_gap: relative_gap(root_ub.max(events[0].lb), events[0].lb),
        root_cut_rounds: root_rounds,
        wall_time: start.elapsed(),
        termination,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::lift_solution;
    use nalgebra::DMatrix;

    #[test]
    fn midpoint_scores_highest() {
        let a = WeightMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let agg = aggregate(&a, &PairwiseConstraints::new(), 2).unwrap();
        let mut z = DMatrix::zeros(6, 6);
        for i in 0..3 {
            z[(i, i)] = 0.5;
        }
        z[(0, 2)] = 0.25;
        z[(2, 0)] = 0.25;
        z[(1, 2)] = 0.1;
        z[(2, 1)] = 0.1;
        let z = SymMatrix::new(z).unwrap();
        assert_eq!(select_branching_pair(&z, &agg), Some((Side::U, 0, 2)));
    }

    #[test]
    fn lifted_solution_scores_zero_everywhere() {
        let a = WeightMatrix::new(DMatrix::from_element(5, 4, 1.0)).unwrap();
        let agg = aggregate(&a, &PairwiseConstraints::new(), 2).unwrap();
        let z = lift_solution(&agg, &[0, 1, 1, 0, 1], &[1, 0, 0, 1]).unwrap();
        for side in [Side::U, Side::V] {
            let n = agg.dim(side);
            let off = if side == Side::U { 0 } else { 5 };
            for i in 0..n {
                for j in i + 1..n {
                    let zij = z[(off + i, off + j)];
                    assert!(zij.min(z[(off + i, off + i)] - zij) <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn cannot_linked_pairs_are_skipped() {
        let a = WeightMatrix::new(DMatrix::from_element(2, 2, 1.0)).unwrap();
        let mut con = PairwiseConstraints::new();
        con.add_cannot_link(Side::U, 0, 1);
        con.add_cannot_link(Side::V, 0, 1);
        let agg = aggregate(&a, &con, 2).unwrap();
        let z = SymMatrix::new(DMatrix::from_element(4, 4, 0.5)).unwrap();
        assert_eq!(select_branching_pair(&z, &agg), None);
    }

    #[test]
    fn conflicting_constraints_fail_before_search() {
        let a = WeightMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::V, 0, 2);
        con.add_cannot_link(Side::V, 0, 2);
        assert!(matches!(
            solve_exact(&a, &con, 2, &ExactParams::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn queue_prefers_larger_bound_then_insertion() {
        let a = WeightMatrix::new(DMatrix::from_element(2, 2, 1.0)).unwrap();
        let agg = aggregate(&a, &PairwiseConstraints::new(), 2).unwrap();
        let mk = |ub: f64, seq: usize| Queued {
            ub,
            seq,
            node: Node {
                id: seq,
                parent: None,
                agg: agg.clone(),
                cuts: CutPool::new(),
                parent_ub: ub,
                depth: 0,
                seed: 0,
            },
        };
        let mut heap: BinaryHeap<Queued> =
            [mk(1.0, 2), mk(2.0, 3), mk(2.0, 1)].into_iter().collect();
        let order: Vec<usize> = std::iter::from_fn(|| heap.pop().map(|q| q.seq)).collect();
        assert_eq!(order, [1, 3, 2]);
    }

    #[test]
    fn gap_helper() {
        assert_eq!(relative_gap(2.0, 1.0), 0.5);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
    }
}
