//! Two-block ADMM for the doubly nonnegative relaxation.
//!
//! Splitting: the first block is `(X, s)` on the affine set
//! `{𝒜X = b, ℬX + s = 0}`; the second block is `(P, R, σ)` with `P ⪰ 0`,
//! `R ≥ 0`, `σ ≥ 0`, coupled by `X = P`, `X = R`, `s = σ`. The affine step is
//! an exact projection through a Gram system whose matrix does not depend on
//! the penalty, so one factorization serves a whole solve.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Side;
use crate::numerics::{psd_part, sym_eig, SemidefiniteLdl, SymMatrix};

use super::bound::{safe_upper_bound, DualEstimate};
use super::relaxation::{Cut, DnnRelaxation, Functional};

#[derive(Debug, Clone)]
pub struct DnnParams {
    /// Target for the scaled primal residual, dual residual and bound gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty.
    pub rho: f64,
    /// Iterations between bound evaluations and penalty updates.
    pub check_every: usize,
    /// Stop as soon as the certified bound drops to this value.
    pub prune_below: Option<f64>,
    pub deadline: Option<Instant>,
}

impl Default for DnnParams {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 5000,
            rho: 1.0,
            check_every: 10,
            prune_below: None,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnnStop {
    Converged,
    Pruned,
    IterationCap,
    Deadline,
}

#[derive(Debug, Clone)]
pub struct DnnSolution {
    /// PSD and entrywise nonnegative primal estimate.
    pub z: SymMatrix,
    /// Multipliers achieving `ub`.
    pub dual: DualEstimate,
    /// Certified bound `safe_upper_bound(dual)`.
    pub ub: f64,
    /// `⟨Ā, Z̃_UV⟩`.
    pub primal_obj: f64,
    pub stop: DnnStop,
    pub iterations: usize,
    /// Largest of the scaled primal residual, dual residual and bound gap at exit.
    pub residual: f64,
}

impl DnnSolution {
    pub fn converged(&self) -> bool {
        self.stop == DnnStop::Converged
    }
}

/// Iterate state carried between solves of related relaxations.
#[derive(Debug, Clone)]
pub struct AdmmState {
    rho: f64,
    scale: f64,
    p: DMatrix<f64>,
    r: DMatrix<f64>,
    u1: DMatrix<f64>,
    u2: DMatrix<f64>,
    cuts: HashMap<Cut, (f64, f64)>,
}

/// Constraint functionals with their factored Gram system.
struct Operator {
    funcs: Vec<Functional>,
    n_eq_u: usize,
    n_eq: usize,
    b: DVector<f64>,
    cuts: Vec<Cut>,
    ldl: SemidefiniteLdl,
}

impl Operator {
    fn new(rel: &DnnRelaxation) -> Self {
        let d = rel.dim();
        let mut funcs = rel.equality_functionals(Side::U);
        let n_eq_u = funcs.len();
        funcs.extend(rel.equality_functionals(Side::V));
        let n_eq = funcs.len();
        let mut b = DVector::zeros(n_eq);
        b.rows_mut(0, n_eq_u).copy_from(&rel.rhs(Side::U));
        b.rows_mut(n_eq_u, n_eq - n_eq_u)
            .copy_from(&rel.rhs(Side::V));
        let cuts: Vec<Cut> = rel.cuts.iter().copied().collect();
        for c in &cuts {
            funcs.push(c.functional(rel.offset(c.side())));
        }
        let total = funcs.len();
        let mut at: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d * d];
        for (a, f) in funcs.iter().enumerate() {
            for &(r, c, w) in &f.terms {
                at[r * d + c].push((a, w));
            }
        }
        let mut g = DMatrix::zeros(total, total);
        for r in 0..d {
            for c in r..d {
                let weight = if r == c { 1.0 } else { 0.5 };
                let list = &at[r * d + c];
                for &(a, wa) in list {
                    for &(bb, wb) in list {
                        g[(a, bb)] += weight * wa * wb;
                    }
                }
            }
        }
        for i in n_eq..total {
            g[(i, i)] += 2.0;
        }
        let ldl = SemidefiniteLdl::new(&g);
        Self {
            funcs,
            n_eq_u,
            n_eq,
            b,
            cuts,
            ldl,
        }
    }

    fn n_cut(&self) -> usize {
        self.cuts.len()
    }
}

impl AdmmState {
    fn cold(d: usize, rho: f64, scale: f64) -> Self {
        Self {
            rho,
            scale,
            p: DMatrix::zeros(d, d),
            r: DMatrix::zeros(d, d),
            u1: DMatrix::zeros(d, d),
            u2: DMatrix::zeros(d, d),
            cuts: HashMap::new(),
        }
    }
}

fn clamp0(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|x| x.max(0.0))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Solves the relaxation to relative accuracy `tol` from a cold start.
pub fn solve_dnn(rel: &DnnRelaxation, tol: f64) -> Result<DnnSolution> {
    let params = DnnParams {
        tol,
        ..DnnParams::default()
    };
    solve_dnn_with(rel, &params, None).map(|(s, _)| s)
}

/// Solves the relaxation, optionally warm-started from a previous state of a
/// relaxation over the same aggregated instance. Cuts present in both keep
/// their slack and multiplier; new cuts start from the current iterate.
pub fn solve_dnn_with(
    rel: &DnnRelaxation,
    params: &DnnParams,
    warm: Option<&AdmmState>,
) -> Result<(DnnSolution, AdmmState)> {
    let k = rel.agg.k();
    if rel.n_bar() < k || rel.m_bar() < k {
        return Err(Error::InvalidArgument(format!(
            "relaxation needs at least k = {k} vertices per side, got {}x{}",
            rel.n_bar(),
            rel.m_bar()
        )));
    }
    if !(params.tol > 0.0) || params.max_iter == 0 || !(params.rho > 0.0) {
        return Err(Error::InvalidArgument(
            "tol, max_iter and rho must be positive".into(),
        ));
    }
    let d = rel.dim();
    let w = rel.objective_matrix();
    let scale = if w.norm() > 0.0 { w.norm() } else { 1.0 };
    let ws = &w / scale;
    let op = Operator::new(rel);
    let n_cut = op.n_cut();

    let mut st = match warm {
        Some(s) if s.p.nrows() == d && s.scale == scale => s.clone(),
        _ => AdmmState::cold(d, params.rho, scale),
    };
    let mut rho = st.rho;
    // Cut slack s, its projection σ and scaled multiplier u3.
    let mut sigma = DVector::zeros(n_cut);
    let mut u3 = DVector::zeros(n_cut);
    for (c, cut) in op.cuts.iter().enumerate() {
        match st.cuts.get(cut) {
            Some(&(sg, u)) => {
                sigma[c] = sg;
                u3[c] = u;
            }
            None => sigma[c] = (-cut.lhs(&st.p, rel.offset(cut.side()))).max(0.0),
        }
    }

    let mut best: Option<(f64, DualEstimate)> = None;
    let mut stop = DnnStop::IterationCap;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let check = params.check_every.max(1);

    for it in 1..=params.max_iter {
        iterations = it;
        // Affine block.
        let x0 = (&st.p - &st.u1 + &st.r - &st.u2) * 0.5 + &ws * (0.5 / rho);
        let a3 = &sigma - &u3;
        let mut rhs = DVector::zeros(op.n_eq + n_cut);
        for (a, f) in op.funcs.iter().enumerate() {
            let fx = f.apply(&x0);
            rhs[a] = if a < op.n_eq {
                2.0 * rho * (op.b[a] - fx)
            } else {
                2.0 * rho * (-fx - a3[a - op.n_eq])
            };
        }
        let mu = op.ldl.solve(&rhs);
        let mut x = x0;
        for (a, f) in op.funcs.iter().enumerate() {
            f.add_adjoint(mu[a] / (2.0 * rho), &mut x);
        }
        symmetrize(&mut x);
        let s = &a3 + mu.rows(op.n_eq, n_cut) / rho;

        // Cone block.
        let eig = sym_eig(&SymMatrix::from_symmetric_unchecked(&x + &st.u1))?;
        let p_new = psd_part(&eig).into_inner();
        let r_new = clamp0(&(&x + &st.u2));
        let sigma_new = (&s + &u3).map(|v| v.max(0.0));

        let dp = (&p_new - &st.p).norm_squared();
        let dr = (&r_new - &st.r).norm_squared();
        let ds = (&sigma_new - &sigma).norm_squared();
        st.u1 += &x - &p_new;
        st.u2 += &x - &r_new;
        u3 += &s - &sigma_new;
        let pres = ((&x - &p_new).norm_squared()
            + (&x - &r_new).norm_squared()
            + (&s - &sigma_new).norm_squared())
        .sqrt()
            / (1.0 + x.norm());
        let dres = rho * (dp + dr + ds).sqrt() / (1.0 + ws.norm());
        st.p = p_new;
        st.r = r_new;
        sigma = sigma_new;

        let last = it == params.max_iter;
        if it % check == 0 || last {
            let dual = extract_dual(rel, &op, &mu, &u3, &st.u2, rho, scale);
            let ub = safe_upper_bound(&dual, rel)?;
            if best.as_ref().is_none_or(|(b, _)| ub < *b) {
                best = Some((ub, dual));
            }
            let pobj = rel.objective(&st.p);
            let gap = (ub - pobj).abs() / (1.0 + ub.abs() + pobj.abs());
            residual = pres.max(dres).max(gap);
            if residual <= params.tol {
                stop = DnnStop::Converged;
                break;
            }
            if let (Some(th), Some((b, _))) = (params.prune_below, &best) {
                if *b <= th {
                    stop = DnnStop::Pruned;
                    break;
                }
            }
            if params.deadline.is_some_and(|dl| Instant::now() >= dl) {
                stop = DnnStop::Deadline;
                break;
            }
            // Residual balancing; scaled multipliers move inversely to ρ.
            if pres > 5.0 * dres && rho < 1e4 {
                rho *= 2.0;
                st.u1 *= 0.5;
                st.u2 *= 0.5;
                u3 *= 0.5;
            } else if dres > 5.0 * pres && rho > 1e-4 {
                rho *= 0.5;
                st.u1 *= 2.0;
                st.u2 *= 2.0;
                u3 *= 2.0;
            }
        }
    }
    let (ub, dual) = best.expect("bound evaluated at least once");
    let shift = (-st.p.min()).max(0.0);
    let mut z = st.p.add_scalar(shift);
    symmetrize(&mut z);
    let primal_obj = rel.objective(&z);
    st.rho = rho;
    st.cuts = op
        .cuts
        .iter()
        .enumerate()
        .map(|(c, cut)| (*cut, (sigma[c], u3[c])))
        .collect();
    let sol = DnnSolution {
        z: SymMatrix::from_symmetric_unchecked(z),
        dual,
        ub,
        primal_obj,
        stop,
        iterations,
        residual,
    };
    Ok((sol, st))
}

/// Multipliers implied by the current iterate, in original objective units.
fn extract_dual(
    rel: &DnnRelaxation,
    op: &Operator,
    mu: &DVector<f64>,
    u3: &DVector<f64>,
    u2: &DMatrix<f64>,
    rho: f64,
    scale: f64,
) -> DualEstimate {
    let (n, m) = (rel.n_bar(), rel.m_bar());
    let lam = mu.rows(0, op.n_eq) * (-scale);
    let lu = lam.rows(0, op.n_eq_u);
    let lv = lam.rows(op.n_eq_u, op.n_eq - op.n_eq_u);
    let mut t_u = Vec::new();
    let mut t_v = Vec::new();
    for (c, cut) in op.cuts.iter().enumerate() {
        let t = (-rho * u3[c] * scale).max(0.0);
        match cut.side() {
            Side::U => t_u.push(t),
            Side::V => t_v.push(t),
        }
    }
    let mut q = u2.map(|v| (-rho * v * scale).max(0.0));
    symmetrize(&mut q);
    DualEstimate {
        y_u: lu.rows(0, n).into_owned(),
        y_v: lv.rows(0, m).into_owned(),
        alpha_u: lu[n],
        alpha_v: lv[m],
        tau_u: lu.rows(n + 1, lu.len() - n - 1).into_owned(),
        tau_v: lv.rows(m + 1, lv.len() - m - 1).into_owned(),
        t_u: DVector::from_vec(t_u),
        t_v: DVector::from_vec(t_v),
        q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PairwiseConstraints, WeightMatrix};
    use crate::numerics::sym_eig;
    use crate::preprocess::aggregate;
    use crate::sdp::relaxation::lift_solution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_for(a: DMatrix<f64>, con: PairwiseConstraints, k: usize) -> DnnRelaxation {
        DnnRelaxation::new(aggregate(&WeightMatrix::new(a).unwrap(), &con, k).unwrap())
    }

    fn assert_dnn(z: &SymMatrix) {
        let eig = sym_eig(z).unwrap();
        assert!(eig.values.min() >= -1e-8, "min eig {}", eig.values.min());
        assert!(z.matrix().min() >= -1e-8);
    }

    #[test]
    fn zero_weights_give_zero() {
        let rel = rel_for(DMatrix::zeros(4, 5), PairwiseConstraints::new(), 2);
        let sol = solve_dnn(&rel, 1e-6).unwrap();
        assert_dnn(&sol.z);
        assert!(sol.primal_obj.abs() < 1e-12);
        assert!(sol.ub >= -1e-12 && sol.ub < 1e-4, "ub {}", sol.ub);
    }

    #[test]
    fn forced_singletons_on_diagonal_weights() {
        // n̄ = m̄ = k with every pair cannot-linked; diagonal A makes the
        // relaxation tight at the identity pairing.
        let mut con = PairwiseConstraints::new();
        con.add_cannot_link(Side::U, 0, 1);
        con.add_cannot_link(Side::V, 0, 1);
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.5]);
        let rel = rel_for(a, con, 2);
        let sol = solve_dnn(&rel, 1e-7).unwrap();
        assert!(sol.converged(), "{:?} residual {}", sol.stop, sol.residual);
        assert!(
            (sol.primal_obj - 4.5).abs() < 1e-4,
            "obj {}",
            sol.primal_obj
        );
        assert!(sol.ub >= 4.5 - 1e-9 && sol.ub < 4.5 + 1e-4, "ub {}", sol.ub);
    }

    #[test]
    fn planted_relaxation_dominates_planted_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(6, 6, |i, j| {
            if (i < 3) == (j < 3) {
                rng.random::<f64>()
            } else {
                0.0
            }
        });
        let rel = rel_for(a, PairwiseConstraints::new(), 2);
        let rows = [0, 0, 0, 1, 1, 1];
        let planted = rel.agg.aggregated_density(&rows, &rows).unwrap();
        let sol = solve_dnn(&rel, 1e-6).unwrap();
        assert_dnn(&sol.z);
        assert!(sol.ub >= planted - 1e-9);
        assert!(
            sol.primal_obj >= planted - 1e-3,
            "{} < {planted}",
            sol.primal_obj
        );
        let lifted = lift_solution(&rel.agg, &rows, &rows).unwrap();
        assert!((rel.objective(lifted.matrix()) - planted).abs() < 1e-12);
    }

    #[test]
    fn warm_start_reaches_same_bound_faster() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
        let rel = rel_for(a, PairwiseConstraints::new(), 2);
        let params = DnnParams {
            tol: 1e-6,
            ..DnnParams::default()
        };
        let (cold, state) = solve_dnn_with(&rel, &params, None).unwrap();
        let (warm, _) = solve_dnn_with(&rel, &params, Some(&state)).unwrap();
        assert!(warm.iterations <= cold.iterations / 2 + params.check_every);
        assert!((warm.ub - cold.ub).abs() < 1e-4 * (1.0 + cold.ub.abs()));
    }

    #[test]
    fn prune_threshold_stops_early() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
        let rel = rel_for(a, PairwiseConstraints::new(), 2);
        let params = DnnParams {
            tol: 1e-8,
            prune_below: Some(1e6),
            ..DnnParams::default()
        };
        let (sol, _) = solve_dnn_with(&rel, &params, None).unwrap();
        assert_eq!(sol.stop, DnnStop::Pruned);
        assert_eq!(sol.iterations, params.check_every);
    }
}
