//! Low-rank heuristic. The relaxation is factored as `Z = [Z_U; Z_V][Z_U; Z_V]ᵀ`
//! with boxed factors and solved by an augmented Lagrangian method; each
//! subproblem runs block Gauss–Seidel projected gradient with
//! Barzilai–Borwein steps.

use std::collections::VecDeque;
use std::thread;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::branch_and_cut::{SolverResult, Termination};
use crate::error::{Error, Result};
use crate::model::{Biclustering, PairwiseConstraints, Side, WeightMatrix};
use crate::numerics::SymMatrix;
use crate::preprocess::{aggregate, AggregatedInstance};
use crate::rounding::round_solution;

const MAX_BACKTRACKS: usize = 60;
const STEP_MIN: f64 = 1e-10;
const STEP_MAX: f64 = 1e10;
const MIN_INNER_EPS: f64 = 1e-9;

/// Smallest r with `r(r+1)/2 > c`, clamped to `[k, max_rank]`.
pub fn choose_rank(c: usize, k: usize, max_rank: usize) -> usize {
    let mut r = 1;
    while r * (r + 1) / 2 <= c {
        r += 1;
    }
    r.max(k).min(max_rank.max(1))
}

/// Number of equality constraints of the factored problem.
pub fn constraint_count(agg: &AggregatedInstance) -> usize {
    agg.n_bar()
        + 1
        + agg.cannot_links(Side::U).len()
        + agg.m_bar()
        + 1
        + agg.cannot_links(Side::V).len()
}

/// Row factors `Z_U` (n̄×r) and column factors `Z_V` (m̄×r), entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub z_u: DMatrix<f64>,
    pub z_v: DMatrix<f64>,
}

impl FactorPair {
    pub fn new(z_u: DMatrix<f64>, z_v: DMatrix<f64>) -> Result<Self> {
        if z_u.ncols() != z_v.ncols() || z_u.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "factor ranks differ or vanish: {} vs {}",
                z_u.ncols(),
                z_v.ncols()
            )));
        }
        if !z_u
            .iter()
            .chain(z_v.iter())
            .all(|x| (0.0..=1.0).contains(x))
        {
            return Err(Error::InvalidArgument(
                "factor entries must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { z_u, z_v })
    }

    /// I.i.d. uniform entries scaled by `scale`.
    pub fn random<R: Rng>(n: usize, m: usize, r: usize, scale: f64, rng: &mut R) -> Self {
        let z_u = DMatrix::from_fn(n, r, |_, _| rng.random::<f64>() * scale);
        let z_v = DMatrix::from_fn(m, r, |_, _| rng.random::<f64>() * scale);
        Self { z_u, z_v }
    }

    pub fn r(&self) -> usize {
        self.z_u.ncols()
    }

    fn block(&self, side: Side) -> &DMatrix<f64> {
        match side {
            Side::U => &self.z_u,
            Side::V => &self.z_v,
        }
    }

    fn block_mut(&mut self, side: Side) -> &mut DMatrix<f64> {
        match side {
            Side::U => &mut self.z_u,
            Side::V => &mut self.z_v,
        }
    }

    /// `[Z_U; Z_V][Z_U; Z_V]ᵀ`.
    pub fn gram(&self) -> SymMatrix {
        let (n, m, r) = (self.z_u.nrows(), self.z_v.nrows(), self.r());
        let mut stacked = DMatrix::zeros(n + m, r);
        stacked.rows_mut(0, n).copy_from(&self.z_u);
        stacked.rows_mut(n, m).copy_from(&self.z_v);
        let g = &stacked * stacked.transpose();
        SymMatrix::from_symmetric_unchecked((&g + g.transpose()) * 0.5)
    }
}

/// Multipliers, penalty and last residuals of the augmented Lagrangian method.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmState {
    /// Ordered as row sums, trace, cannot-links.
    pub lambda_u: DVector<f64>,
    pub lambda_v: DVector<f64>,
    pub beta: f64,
    pub residual_u: DVector<f64>,
    pub residual_v: DVector<f64>,
    /// Outer iterations performed.
    pub iteration: usize,
    /// `max(‖r_U‖, ‖r_V‖)` at the previous outer iteration.
    pub last_residual: f64,
}

impl AlmState {
    pub fn new(agg: &AggregatedInstance, beta: f64) -> Self {
        let lu = agg.n_bar() + 1 + agg.cannot_links(Side::U).len();
        let lv = agg.m_bar() + 1 + agg.cannot_links(Side::V).len();
        Self {
            lambda_u: DVector::zeros(lu),
            lambda_v: DVector::zeros(lv),
            beta,
            residual_u: DVector::zeros(lu),
            residual_v: DVector::zeros(lv),
            iteration: 0,
            last_residual: f64::INFINITY,
        }
    }
}

/// Linear map `X ↦ 𝒜(X)` of one side, evaluated on `X = Z Zᵀ` without forming it.
#[derive(Debug, Clone)]
struct SideOp {
    e: Vec<f64>,
    cl: Vec<(usize, usize)>,
    k: f64,
}

impl SideOp {
    fn new(agg: &AggregatedInstance, side: Side) -> Self {
        Self {
            e: agg.sizes(side).iter().map(|&s| s as f64).collect(),
            cl: agg.cannot_links(side).iter().copied().collect(),
            k: agg.k() as f64,
        }
    }

    fn n(&self) -> usize {
        self.e.len()
    }

    fn len(&self) -> usize {
        self.n() + 1 + self.cl.len()
    }

    /// `𝒜(Z Zᵀ) − b`.
    fn residual(&self, z: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n();
        let e = DVector::from_column_slice(&self.e);
        let ze = z.transpose() * &e;
        let rows = z * ze;
        let mut out = DVector::zeros(self.len());
        let mut trace = 0.0;
        for i in 0..n {
            out[i] = rows[i] - 1.0;
            trace += self.e[i] * z.row(i).norm_squared();
        }
        out[n] = trace - self.k;
        for (c, &(i, j)) in self.cl.iter().enumerate() {
            out[n + 1 + c] = z.row(i).dot(&z.row(j));
        }
        out
    }

    /// `𝒜ᵀ(w) Z`.
    fn adjoint_times(&self, w: &DVector<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let e = DVector::from_column_slice(&self.e);
        let y = w.rows(0, n).into_owned();
        let alpha = w[n];
        let ezt = z.transpose() * &e;
        let yzt = z.transpose() * &y;
        let mut out = (&y * ezt.transpose() + &e * yzt.transpose()) * 0.5;
        for i in 0..n {
            let scaled = z.row(i) * (alpha * self.e[i]);
            let mut row = out.row_mut(i);
            row += scaled;
        }
        for (c, &(i, j)) in self.cl.iter().enumerate() {
            let t = 0.5 * w[n + 1 + c];
            let zi = z.row(i).into_owned();
            let zj = z.row(j).into_owned();
            let mut ri = out.row_mut(i);
            ri += zj * t;
            let mut rj = out.row_mut(j);
            rj += zi * t;
        }
        out
    }
}

/// Augmented Lagrangian of one instance for fixed multipliers and penalty.
#[derive(Debug, Clone)]
struct Objective<'a> {
    a_bar: &'a DMatrix<f64>,
    ops: &'a [SideOp; 2],
    lambda: [&'a DVector<f64>; 2],
    beta: f64,
}

fn side_index(side: Side) -> usize {
    match side {
        Side::U => 0,
        Side::V => 1,
    }
}

impl Objective<'_> {
    fn value(&self, f: &FactorPair) -> f64 {
        let data = (self.a_bar * &f.z_v).dot(&f.z_u);
        let mut v = -data;
        for side in [Side::U, Side::V] {
            let s = side_index(side);
            let r = self.ops[s].residual(f.block(side));
            v += self.lambda[s].dot(&r) + 0.5 * self.beta * r.norm_squared();
        }
        v
    }

    fn gradient(&self, f: &FactorPair, side: Side) -> DMatrix<f64> {
        let s = side_index(side);
        let z = f.block(side);
        let r = self.ops[s].residual(z);
        let w = self.lambda[s] + r * self.beta;
        let coupling = match side {
            Side::U => self.a_bar * &f.z_v,
            Side::V => self.a_bar.transpose() * &f.z_u,
        };
        self.ops[s].adjoint_times(&w, z) * 2.0 - coupling
    }

    /// `‖Π(Z − ∇L) − Z‖` for one block.
    fn stationarity(&self, f: &FactorPair, side: Side) -> f64 {
        let z = f.block(side);
        let g = self.gradient(f, side);
        (project(&(z - g)) - z).norm()
    }
}

fn project(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(|v| v.clamp(0.0, 1.0))
}

/// Precomputed operators of an aggregated instance.
#[derive(Debug, Clone)]
struct Problem {
    a_bar: DMatrix<f64>,
    ops: [SideOp; 2],
}

impl Problem {
    fn new(agg: &AggregatedInstance) -> Self {
        Self {
            a_bar: agg.a_bar().clone(),
            ops: [SideOp::new(agg, Side::U), SideOp::new(agg, Side::V)],
        }
    }

    fn objective<'a>(&'a self, s: &'a AlmState, beta: f64) -> Objective<'a> {
        Objective {
            a_bar: &self.a_bar,
            ops: &self.ops,
            lambda: [&s.lambda_u, &s.lambda_v],
            beta,
        }
    }

    fn check(&self, f: &FactorPair, s: &AlmState) -> Result<()> {
        let (n, m) = self.a_bar.shape();
        if f.z_u.nrows() != n || f.z_v.nrows() != m || f.z_u.ncols() != f.z_v.ncols() {
            return Err(Error::Dimension(format!(
                "factors {}x{} and {}x{} do not match a {n}x{m} instance",
                f.z_u.nrows(),
                f.z_u.ncols(),
                f.z_v.nrows(),
                f.z_v.ncols()
            )));
        }
        if s.lambda_u.len() != self.ops[0].len() || s.lambda_v.len() != self.ops[1].len() {
            return Err(Error::Dimension(format!(
                "multipliers of length {} and {}, expected {} and {}",
                s.lambda_u.len(),
                s.lambda_v.len(),
                self.ops[0].len(),
                self.ops[1].len()
            )));
        }
        Ok(())
    }
}

/// Value of the augmented Lagrangian at `f` for the multipliers and penalty of `s`.
pub fn eval_aug_lagrangian(f: &FactorPair, s: &AlmState, agg: &AggregatedInstance) -> Result<f64> {
    let p = Problem::new(agg);
    p.check(f, s)?;
    Ok(p.objective(s, s.beta).value(f))
}

/// Gradients of the augmented Lagrangian with respect to `Z_U` and `Z_V`.
pub fn grad_aug_lagrangian(
    f: &FactorPair,
    s: &AlmState,
    agg: &AggregatedInstance,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = Problem::new(agg);
    p.check(f, s)?;
    let obj = p.objective(s, s.beta);
    Ok((obj.gradient(f, Side::U), obj.gradient(f, Side::V)))
}

/// Residuals `𝒜_U(Z_U Z_Uᵀ) − b_U` and `𝒜_V(Z_V Z_Vᵀ) − b_V`.
pub fn constraint_residuals(
    f: &FactorPair,
    agg: &AggregatedInstance,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let p = Problem::new(agg);
    p.check(f, &AlmState::new(agg, 1.0))?;
    Ok((p.ops[0].residual(&f.z_u), p.ops[1].residual(&f.z_v)))
}

/// Stopping measure of the method: the largest of both constraint residual
/// norms and both projected-gradient norms of the Lagrangian at the
/// multipliers of `s`.
pub fn alm_criterion(f: &FactorPair, s: &AlmState, agg: &AggregatedInstance) -> Result<f64> {
    let p = Problem::new(agg);
    p.check(f, s)?;
    Ok(criterion(&p, f, s))
}

fn criterion(p: &Problem, f: &FactorPair, s: &AlmState) -> f64 {
    let (res, stat) = criterion_parts(p, f, s);
    res.max(stat)
}

/// Residual norm and projected-gradient stationarity of the Lagrangian.
fn criterion_parts(p: &Problem, f: &FactorPair, s: &AlmState) -> (f64, f64) {
    let lag = p.objective(s, 0.0);
    let ru = p.ops[0].residual(&f.z_u).norm();
    let rv = p.ops[1].residual(&f.z_v).norm();
    (
        ru.max(rv),
        lag.stationarity(f, Side::U)
            .max(lag.stationarity(f, Side::V)),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbParams {
    /// Window of past BB2 values used when BB2 is much shorter than BB1.
    pub m_alpha: usize,
    pub tau_alpha: f64,
}

impl Default for BbParams {
    fn default() -> Self {
        Self {
            m_alpha: 2,
            tau_alpha: 0.1,
        }
    }
}

/// Adaptive Barzilai–Borwein steplength from the `(s, z)` step and gradient
/// differences of past iterations, most recent last. Returns 1 on an empty
/// history; the result is clamped to `[1e-10, 1e10]`.
pub fn bb_steplength(history: &[(DMatrix<f64>, DMatrix<f64>)], params: &BbParams) -> f64 {
    let Some((s, z)) = history.last() else {
        return 1.0;
    };
    let bb = |s: &DMatrix<f64>, z: &DMatrix<f64>| {
        let sz = s.dot(z);
        (s.norm_squared() / sz, sz / z.norm_squared())
    };
    let (bb1, bb2) = bb(s, z);
    let alpha = if bb2 / bb1 < params.tau_alpha {
        let start = history.len().saturating_sub(params.m_alpha + 1);
        history[start..]
            .iter()
            .map(|(s, z)| bb(s, z).1)
            .fold(f64::INFINITY, f64::min)
    } else {
        bb1
    };
    if alpha.is_nan() || alpha <= 0.0 {
        STEP_MIN
    } else {
        alpha.clamp(STEP_MIN, STEP_MAX)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerParams {
    /// Backtracking contraction.
    pub theta: f64,
    /// Sufficient decrease constant.
    pub sigma: f64,
    pub bb: BbParams,
    pub max_outer: usize,
    /// Cap per block and outer iteration.
    pub max_inner: usize,
    /// Record the objective after every accepted step.
    pub record_trace: bool,
}

impl Default for InnerParams {
    fn default() -> Self {
        Self {
            theta: 0.5,
            sigma: 1e-4,
            bb: BbParams::default(),
            max_outer: 1000,
            max_inner: 2000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubproblemReport {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// False when an iteration cap or a failed line search ended the solve.
    pub converged: bool,
    /// Objective after each accepted step, when recorded.
    pub trace: Vec<f64>,
}

/// Block Gauss–Seidel projected-gradient minimization of the augmented
/// Lagrangian over the boxes, U block first.
pub fn solve_subproblem(
    f0: &FactorPair,
    s: &AlmState,
    agg: &AggregatedInstance,
    eps: f64,
    params: &InnerParams,
) -> Result<(FactorPair, SubproblemReport)> {
    let p = Problem::new(agg);
    p.check(f0, s)?;
    if !f0
        .z_u
        .iter()
        .chain(f0.z_v.iter())
        .all(|x| (0.0..=1.0).contains(x))
    {
        return Err(Error::InvalidArgument(
            "starting factors leave the box".into(),
        ));
    }
    Ok(subproblem(&p, f0.clone(), s, eps, params))
}

fn subproblem(
    p: &Problem,
    mut f: FactorPair,
    s: &AlmState,
    eps: f64,
    params: &InnerParams,
) -> (FactorPair, SubproblemReport) {
    let obj = p.objective(s, s.beta);
    let mut report = SubproblemReport::default();
    for _ in 0..params.max_outer {
        report.outer_iterations += 1;
        let (old_u, old_v) = (f.z_u.clone(), f.z_v.clone());
        let mut blocks_ok = true;
        for side in [Side::U, Side::V] {
            let (iters, ok) = descend_block(&obj, &mut f, side, eps, params, &mut report.trace);
            report.inner_iterations += iters;
            blocks_ok &= ok;
        }
        let change = (&f.z_u - old_u).norm().max((&f.z_v - old_v).norm());
        if change <= eps {
            report.converged = blocks_ok;
            return (f, report);
        }
    }
    (f, report)
}

/// Projected gradient on one block with the other fixed. Returns the number of
/// accepted steps and whether the block reached stationarity.
fn descend_block(
    obj: &Objective<'_>,
    f: &mut FactorPair,
    side: Side,
    eps: f64,
    params: &InnerParams,
    trace: &mut Vec<f64>,
) -> (usize, bool) {
    let mut history: VecDeque<(DMatrix<f64>, DMatrix<f64>)> = VecDeque::new();
    let mut g = obj.gradient(f, side);
    let mut value = obj.value(f);
    for it in 0..params.max_inner {
        let x = f.block(side).clone();
        if (project(&(&x - &g)) - &x).norm() <= eps {
            return (it, true);
        }
        let alpha = bb_steplength(history.make_contiguous(), &params.bb);
        let d = project(&(&x - &g * alpha)) - &x;
        let slope = g.dot(&d);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            *f.block_mut(side) = project(&(&x + &d * step));
            let v = obj.value(f);
            if v <= value + params.sigma * step * slope {
                accepted = Some(v);
                break;
            }
            step *= params.theta;
        }
        let Some(v) = accepted else {
            *f.block_mut(side) = x;
            return (it, false);
        };
        let g_new = obj.gradient(f, side);
        history.push_back((f.block(side) - &x, &g_new - &g));
        if history.len() > params.bb.m_alpha + 1 {
            history.pop_front();
        }
        g = g_new;
        value = v;
        if params.record_trace {
            trace.push(v);
        }
    }
    (params.max_inner, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmParams {
    pub beta1: f64,
    /// Penalty growth factor.
    pub gamma: f64,
    /// Required residual contraction per outer iteration.
    pub tau: f64,
    /// Stopping tolerance.
    pub eps: f64,
    pub max_outer: usize,
    pub inner_tol: InnerTolerance,
    pub inner: InnerParams,
}

/// Tolerance of the subproblem at each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerTolerance {
    /// `ε_k = eps` throughout.
    Constant,
    /// `ε_k = min(eps, factor · max(‖r_U‖, ‖r_V‖))` of the previous iterate.
    /// A constant tolerance stalls once the residual stems from coordinates
    /// closer than `eps` to the box boundary.
    Residual(f64),
}

impl Default for AlmParams {
    fn default() -> Self {
        Self {
            beta1: 10.0,
            gamma: 2.0,
            tau: 0.5,
            eps: 1e-3,
            max_outer: 200,
            inner_tol: InnerTolerance::Residual(0.1),
            inner: InnerParams::default(),
        }
    }
}

impl AlmParams {
    fn inner_eps(&self, state: &AlmState) -> f64 {
        match self.inner_tol {
            InnerTolerance::Constant => self.eps,
            InnerTolerance::Residual(c) => self.eps.min(c * state.last_residual).max(MIN_INNER_EPS),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.beta1 > 0.0
            && self.gamma > 1.0
            && self.tau > 0.0
            && self.tau < 1.0
            && self.eps > 0.0
            && !matches!(self.inner_tol, InnerTolerance::Residual(c) if !(c > 0.0))
            && self.inner.theta > 0.0
            && self.inner.theta < 1.0
            && self.inner.sigma > 0.0
            && self.inner.sigma < 1.0
            && self.inner.bb.tau_alpha > 0.0
            && self.inner.bb.tau_alpha < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid augmented Lagrangian parameters: {self:?}"
            )))
        }
    }
}

/// One outer iteration: subproblem solve, multiplier update `λ ← λ + β r`,
/// stopping test, penalty update. Returns the new factors and the stopping
/// measure.
pub fn alm_step(
    f: &FactorPair,
    state: &mut AlmState,
    agg: &AggregatedInstance,
    params: &AlmParams,
) -> Result<(FactorPair, f64)> {
    params.validate()?;
    let p = Problem::new(agg);
    p.check(f, state)?;
    let (f, record) = step(&p, f.clone(), state, params);
    Ok((f, record.residual.max(record.stationarity)))
}

/// Log entry of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmIterationRecord {
    pub iteration: usize,
    /// Penalty used by this iteration's subproblem.
    pub beta: f64,
    /// `max(‖r_U‖, ‖r_V‖)` after the subproblem.
    pub residual: f64,
    /// Projected-gradient norm of the Lagrangian at the updated multipliers.
    pub stationarity: f64,
    pub inner_eps: f64,
    pub subproblem_outer: usize,
    pub subproblem_inner: usize,
}

fn step(
    p: &Problem,
    f: FactorPair,
    state: &mut AlmState,
    params: &AlmParams,
) -> (FactorPair, AlmIterationRecord) {
    let beta = state.beta;
    let inner_eps = params.inner_eps(state);
    let (f, sub) = subproblem(p, f, state, inner_eps, &params.inner);
    let ru = p.ops[0].residual(&f.z_u);
    let rv = p.ops[1].residual(&f.z_v);
    state.lambda_u += &ru * state.beta;
    state.lambda_v += &rv * state.beta;
    let res = ru.norm().max(rv.norm());
    state.residual_u = ru;
    state.residual_v = rv;
    state.iteration += 1;
    let (_, stationarity) = criterion_parts(p, &f, state);
    if res.max(stationarity) > params.eps && res > params.tau * state.last_residual {
        state.beta *= params.gamma;
    }
    state.last_residual = res;
    let record = AlmIterationRecord {
        iteration: state.iteration,
        beta,
        residual: res,
        stationarity,
        inner_eps,
        subproblem_outer: sub.outer_iterations,
        subproblem_inner: sub.inner_iterations,
    };
    (f, record)
}

#[derive(Debug, Clone)]
pub struct AlmOutcome {
    pub factors: FactorPair,
    pub state: AlmState,
    pub converged: bool,
    /// Stopping measure at the returned point.
    pub criterion: f64,
    /// Scale applied to the uniform initial factors.
    pub init_scale: f64,
    pub history: Vec<AlmIterationRecord>,
}

/// Augmented Lagrangian method from uniform random factors of rank `r`
/// scaled by `1/√r`.
pub fn alm_solve(
    agg: &AggregatedInstance,
    r: usize,
    seed: u64,
    params: &AlmParams,
) -> Result<AlmOutcome> {
    params.validate()?;
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be positive".into()));
    }
    let p = Problem::new(agg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init_scale = 1.0 / (r as f64).sqrt();
    let mut f = FactorPair::random(agg.n_bar(), agg.m_bar(), r, init_scale, &mut rng);
    let mut state = AlmState::new(agg, params.beta1);
    let mut crit = f64::INFINITY;
    let mut history = Vec::new();
    while state.iteration < params.max_outer {
        let (next, record) = step(&p, f, &mut state, params);
        f = next;
        crit = record.residual.max(record.stationarity);
        history.push(record);
        if crit <= params.eps {
            break;
        }
    }
    Ok(AlmOutcome {
        factors: f,
        state,
        converged: crit <= params.eps,
        criterion: crit,
        init_scale,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicParams {
    pub restarts: usize,
    pub seed: u64,
    /// Worker threads; restarts are independent so the result does not depend on it.
    pub threads: usize,
    pub alm: AlmParams,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            threads: 1,
            alm: AlmParams::default(),
        }
    }
}

/// Log entry of one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord {
    pub restart: usize,
    pub seed: u64,
    pub rank: usize,
    pub init_scale: f64,
    pub alm_iterations: usize,
    pub converged: bool,
    pub criterion: f64,
    /// `None` when rounding found no feasible assignment.
    pub objective: Option<f64>,
    pub wall_time: std::time::Duration,
    pub iterations: Vec<AlmIterationRecord>,
}

fn restart_seed(master: u64, restart: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(restart as u64 + 1);
    rng.random()
}

/// Multistart low-rank heuristic. The result carries no certificate: `ub`
/// and the gaps are NaN.
pub fn heuristic_solve(
    a: &WeightMatrix,
    con: &PairwiseConstraints,
    k: usize,
    params: &HeuristicParams,
) -> Result<SolverResult> {
    heuristic_solve_logged(a, con, k, params).map(|(r, _)| r)
}

/// [`heuristic_solve`] together with the per-restart log.
pub fn heuristic_solve_logged(
    a: &WeightMatrix,
    con: &PairwiseConstraints,
    k: usize,
    params: &HeuristicParams,
) -> Result<(SolverResult, Vec<RestartRecord>)> {
    params.alm.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if params.restarts == 0 || params.threads == 0 {
        return Err(Error::InvalidArgument(
            "restarts and threads must be positive".into(),
        ));
    }
    con.validate(a.n(), a.m())?;
    let start = Instant::now();
    let agg = aggregate(a, con, k).map_err(Error::Infeasible)?;
    let rank = choose_rank(constraint_count(&agg), k, agg.n_bar().min(agg.m_bar()));

    let run = |i: usize| -> (RestartRecord, Result<(Biclustering, f64)>) {
        let t0 = Instant::now();
        let seed = restart_seed(params.seed, i);
        let alm = alm_solve(&agg, rank, seed, &params.alm);
        let (rounded, record) = match alm {
            Ok(out) => {
                let rounded = round_solution(&out.factors.gram(), &agg, seed);
                let record = RestartRecord {
                    restart: i,
                    seed,
                    rank,
                    init_scale: out.init_scale,
                    alm_iterations: out.state.iteration,
                    converged: out.converged,
                    criterion: out.criterion,
                    objective: rounded.as_ref().ok().map(|(_, v)| *v),
                    wall_time: t0.elapsed(),
                    iterations: out.history,
                };
                (rounded, record)
            }
            Err(e) => {
                let record = RestartRecord {
                    restart: i,
                    seed,
                    rank,
                    init_scale: f64::NAN,
                    alm_iterations: 0,
                    converged: false,
                    criterion: f64::NAN,
                    objective: None,
                    wall_time: t0.elapsed(),
                    iterations: Vec::new(),
                };
                (Err(e), record)
            }
        };
        (record, rounded)
    };

    type Outcome = (RestartRecord, Result<(Biclustering, f64)>);
    let mut outcomes: Vec<Option<Outcome>> = (0..params.restarts).map(|_| None).collect();
    let threads = params.threads.min(params.restarts);
    thread::scope(|scope| {
        let run = &run;
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    (t..params.restarts)
                        .step_by(threads)
                        .map(|i| (i, run(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, out) in h.join().expect("restart worker panicked") {
                outcomes[i] = Some(out);
            }
        }
    });

    let mut records = Vec::with_capacity(params.restarts);
    let mut best: Option<(Biclustering, f64)> = None;
    let mut first_err = None;
    for (record, rounded) in outcomes.into_iter().flatten() {
        records.push(record);
        match rounded {
            Ok((sol, obj)) => {
                if best.as_ref().is_none_or(|(_, b)| obj > *b) {
                    best = Some((sol, obj));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((best, lb)) = best else {
        return Err(first_err
            .unwrap_or_else(|| Error::InvalidArgument("no restart produced a solution".into())));
    };
    let result = SolverResult {
        best,
        lb,
        ub: f64::NAN,
        gap: f64::NAN,
        nodes: 0,
        root_gap: f64::NAN,
        root_cut_rounds: 0,
        wall_time: start.elapsed(),
        termination: Termination::Heuristic,
        events: Vec::new(),
    };
    Ok((result, records))
}
