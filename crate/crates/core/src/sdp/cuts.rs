use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Side;
use crate::numerics::SymMatrix;

use super::relaxation::{Cut, CutPool, DnnRelaxation};

/// Minimum violation for a cut to be separated.
pub const VIOLATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct SeparationParams {
    /// Candidates examined per side.
    pub max_separate: usize,
    /// Cuts returned in total.
    pub max_add: usize,
    pub seed: u64,
}

impl Default for SeparationParams {
    fn default() -> Self {
        Self {
            max_separate: 100_000,
            max_add: 10_000,
            seed: 0,
        }
    }
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1)
}

fn triangle_count(n: usize) -> usize {
    n * n.saturating_sub(1) * n.saturating_sub(2) / 2
}

/// Every pair and triangle inequality on a side of size `n`.
pub fn all_cuts(side: Side, n: usize) -> Vec<Cut> {
    let mut out = Vec::with_capacity(pair_count(n) + triangle_count(n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.push(Cut::Pair { side, i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for h in j + 1..n {
                if i != j && i != h {
                    out.push(Cut::Triangle { side, i, j, h });
                }
            }
        }
    }
    out
}

fn draw(rng: &mut ChaCha8Rng, side: Side, n: usize) -> Cut {
    let pairs = pair_count(n) as f64;
    let total = pairs + triangle_count(n) as f64;
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    if n < 3 || rng.random::<f64>() * total < pairs {
        return Cut::Pair { side, i, j };
    }
    loop {
        let h = rng.random_range(0..n);
        if h != i && h != j {
            return Cut::triangle(side, i, j, h).expect("distinct indices");
        }
    }
}

/// Violated pair and triangle inequalities not already in the relaxation's
/// pool, most violated first (ties by cut order), at most `max_add`.
///
/// Sides with at most `max_separate` inequalities are enumerated
/// exhaustively; larger sides are sampled with `max_separate` seeded draws.
pub fn separate_cuts(z: &SymMatrix, rel: &DnnRelaxation, params: &SeparationParams) -> Vec<Cut> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut found: Vec<(f64, Cut)> = Vec::new();
    let mut seen = HashSet::new();
    for side in [Side::U, Side::V] {
        let n = rel.agg.dim(side);
        if n < 2 {
            continue;
        }
        let off = rel.offset(side);
        let mut consider = |cut: Cut| {
            if rel.cuts.contains(&cut) || !seen.insert(cut) {
                return;
            }
            let v = cut.lhs(z.matrix(), off);
            if v > VIOLATION_TOL {
                found.push((v, cut));
            }
        };
        if pair_count(n) + triangle_count(n) <= params.max_separate {
            all_cuts(side, n).into_iter().for_each(&mut consider);
        } else {
            for _ in 0..params.max_separate {
                consider(draw(&mut rng, side, n));
            }
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    found
        .into_iter()
        .take(params.max_add)
        .map(|(_, c)| c)
        .collect()
}

/// Removes cuts whose slack `−lhs(Z̃)` exceeds `slack_tol`.
pub fn purge_inactive(pool: &CutPool, z: &SymMatrix, n_bar: usize, slack_tol: f64) -> CutPool {
    let mut out = pool.clone();
    out.retain(|c| {
        let off = if c.side() == Side::U { 0 } else { n_bar };
        -c.lhs(z.matrix(), off) <= slack_tol
    });
    out
}
