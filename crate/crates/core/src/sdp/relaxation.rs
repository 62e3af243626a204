use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Side;
use crate::numerics::SymMatrix;
use crate::preprocess::AggregatedInstance;

/// A valid inequality on one diagonal block of Z, written `lhs(Z) ≤ 0`.
///
/// * `Pair`: `Z_ij − Z_ii ≤ 0`.
/// * `Triangle`: `Z_ij + Z_ih − Z_ii − Z_jh ≤ 0`, with `j < h`.
///
/// Indices are aggregated vertices local to `side`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cut {
    Pair {
        side: Side,
        i: usize,
        j: usize,
    },
    Triangle {
        side: Side,
        i: usize,
        j: usize,
        h: usize,
    },
}

impl Cut {
    pub fn pair(side: Side, i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "pair cut needs distinct indices, got ({i}, {j})"
            )));
        }
        Ok(Cut::Pair { side, i, j })
    }

    /// Triangle cut with apex `i`; the order of `j` and `h` is irrelevant.
    pub fn triangle(side: Side, i: usize, j: usize, h: usize) -> Result<Self> {
        if i == j || i == h || j == h {
            return Err(Error::InvalidArgument(format!(
                "triangle cut needs distinct indices, got ({i}, {j}, {h})"
            )));
        }
        let (j, h) = if j < h { (j, h) } else { (h, j) };
        Ok(Cut::Triangle { side, i, j, h })
    }

    pub fn side(&self) -> Side {
        match *self {
            Cut::Pair { side, .. } | Cut::Triangle { side, .. } => side,
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        match *self {
            Cut::Pair { i, j, .. } => vec![i, j],
            Cut::Triangle { i, j, h, .. } => vec![i, j, h],
        }
    }

    /// Rewrites indices through `remap`; `None` if two indices coincide afterwards.
    pub fn remapped(&self, remap: &[usize]) -> Option<Self> {
        match *self {
            Cut::Pair { side, i, j } => Cut::pair(side, remap[i], remap[j]).ok(),
            Cut::Triangle { side, i, j, h } => {
                Cut::triangle(side, remap[i], remap[j], remap[h]).ok()
            }
        }
    }

    /// `lhs(Z)` evaluated on the diagonal block of `side`; positive means violated.
    pub fn lhs(&self, z: &DMatrix<f64>, offset: usize) -> f64 {
        let g = |a: usize, b: usize| z[(offset + a, offset + b)];
        match *self {
            Cut::Pair { i, j, .. } => g(i, j) - g(i, i),
            Cut::Triangle { i, j, h, .. } => g(i, j) + g(i, h) - g(i, i) - g(j, h),
        }
    }

    /// Terms `(r, c, coef)` with `r ≤ c` in the coordinates of the full matrix.
    pub(crate) fn functional(&self, offset: usize) -> Functional {
        let mut f = Functional::default();
        match *self {
            Cut::Pair { i, j, .. } => {
                f.push(offset + i, offset + j, 1.0);
                f.push(offset + i, offset + i, -1.0);
            }
            Cut::Triangle { i, j, h, .. } => {
                f.push(offset + i, offset + j, 1.0);
                f.push(offset + i, offset + h, 1.0);
                f.push(offset + i, offset + i, -1.0);
                f.push(offset + j, offset + h, -1.0);
            }
        }
        f
    }
}

/// Active cuts of a relaxation. Insertion order is preserved and duplicates rejected.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    index: HashSet<Cut>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn contains(&self, cut: &Cut) -> bool {
        self.index.contains(cut)
    }

    /// Returns false if the cut was already present.
    pub fn insert(&mut self, cut: Cut) -> bool {
        if self.index.insert(cut) {
            self.cuts.push(cut);
            true
        } else {
            false
        }
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cut> {
        self.cuts.iter()
    }

    pub fn count(&self, side: Side) -> usize {
        self.cuts.iter().filter(|c| c.side() == side).count()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Cut) -> bool) {
        let index = &mut self.index;
        self.cuts.retain(|c| {
            let k = keep(c);
            if !k {
                index.remove(c);
            }
            k
        });
    }

    /// Cuts rewritten through a vertex merge on `side`; degenerate cuts are dropped.
    pub fn remapped(&self, side: Side, remap: &[usize]) -> CutPool {
        let mut out = CutPool::new();
        for c in &self.cuts {
            let mapped = if c.side() == side {
                c.remapped(remap)
            } else {
                Some(*c)
            };
            if let Some(m) = mapped {
                out.insert(m);
            }
        }
        out
    }
}

impl FromIterator<Cut> for CutPool {
    fn from_iter<T: IntoIterator<Item = Cut>>(iter: T) -> Self {
        let mut pool = CutPool::new();
        for c in iter {
            pool.insert(c);
        }
        pool
    }
}

/// Sparse linear functional `X ↦ Σ coef · X[r, c]` over symmetric X, with `r ≤ c`.
///
/// Its Riesz representer F has `F_rr = coef` and `F_rc = F_cr = coef / 2`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Functional {
    pub terms: Vec<(usize, usize, f64)>,
}

impl Functional {
    fn push(&mut self, r: usize, c: usize, coef: f64) {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.terms.push((r, c, coef));
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> f64 {
        self.terms.iter().map(|&(r, c, w)| w * x[(r, c)]).sum()
    }

    /// `out += s · F`.
    pub fn add_adjoint(&self, s: f64, out: &mut DMatrix<f64>) {
        for &(r, c, w) in &self.terms {
            if r == c {
                out[(r, r)] += s * w;
            } else {
                out[(r, c)] += 0.5 * s * w;
                out[(c, r)] += 0.5 * s * w;
            }
        }
    }
}

/// The doubly nonnegative relaxation of an aggregated instance.
///
/// Z is indexed by U vertices `0..n̄` followed by V vertices `n̄..n̄+m̄`.
/// The objective is `⟨Ā, Z_UV⟩ = ⟨W, Z⟩` with `W_UV = Ā / 2`.
#[derive(Debug, Clone)]
pub struct DnnRelaxation {
    pub agg: AggregatedInstance,
    pub cuts: CutPool,
}

impl DnnRelaxation {
    pub fn new(agg: AggregatedInstance) -> Self {
        Self {
            agg,
            cuts: CutPool::new(),
        }
    }

    pub fn with_cuts(agg: AggregatedInstance, cuts: CutPool) -> Result<Self> {
        let rel = Self { agg, cuts };
        for c in rel.cuts.iter() {
            let n = rel.agg.dim(c.side());
            if c.indices().iter().any(|&x| x >= n) {
                return Err(Error::Dimension(format!(
                    "cut {c:?} out of range for side of size {n}"
                )));
            }
        }
        Ok(rel)
    }

    pub fn n_bar(&self) -> usize {
        self.agg.n_bar()
    }

    pub fn m_bar(&self) -> usize {
        self.agg.m_bar()
    }

    pub fn dim(&self) -> usize {
        self.n_bar() + self.m_bar()
    }

    pub fn offset(&self, side: Side) -> usize {
        match side {
            Side::U => 0,
            Side::V => self.n_bar(),
        }
    }

    /// Rows of 𝒜 on one side: size-weighted row sums, the trace, then CL zeros.
    pub fn constraint_count(&self, side: Side) -> usize {
        self.agg.dim(side) + 1 + self.agg.cannot_links(side).len()
    }

    pub(crate) fn equality_functionals(&self, side: Side) -> Vec<Functional> {
        let n = self.agg.dim(side);
        let off = self.offset(side);
        let e = self.agg.sizes(side);
        let mut out = Vec::with_capacity(self.constraint_count(side));
        for i in 0..n {
            let mut f = Functional::default();
            for (j, &ej) in e.iter().enumerate() {
                f.push(off + i, off + j, ej as f64);
            }
            out.push(f);
        }
        let mut tr = Functional::default();
        for (i, &ei) in e.iter().enumerate() {
            tr.push(off + i, off + i, ei as f64);
        }
        out.push(tr);
        for &(i, j) in self.agg.cannot_links(side) {
            let mut f = Functional::default();
            f.push(off + i, off + j, 1.0);
            out.push(f);
        }
        out
    }

    /// `b = [1; k; 0]` for one side.
    pub fn rhs(&self, side: Side) -> DVector<f64> {
        let n = self.agg.dim(side);
        let mut b = DVector::zeros(self.constraint_count(side));
        b.rows_mut(0, n).fill(1.0);
        b[n] = self.agg.k() as f64;
        b
    }

    /// `𝒜_side(Z_side)` where `z` is the full (n̄+m̄) matrix.
    pub fn apply_a(&self, side: Side, z: &DMatrix<f64>) -> DVector<f64> {
        let fs = self.equality_functionals(side);
        DVector::from_iterator(fs.len(), fs.iter().map(|f| f.apply(z)))
    }

    /// `𝒜_sideᵀ(λ)` embedded in a full (n̄+m̄) matrix.
    pub fn adjoint_a(&self, side: Side, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
        let fs = self.equality_functionals(side);
        if lambda.len() != fs.len() {
            return Err(Error::Dimension(format!(
                "multiplier length {} but side {side} has {} constraints",
                lambda.len(),
                fs.len()
            )));
        }
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for (f, &l) in fs.iter().zip(lambda.iter()) {
            f.add_adjoint(l, &mut out);
        }
        Ok(out)
    }

    /// Cuts of `side` in pool order.
    pub fn side_cuts(&self, side: Side) -> Vec<Cut> {
        self.cuts
            .iter()
            .filter(|c| c.side() == side)
            .copied()
            .collect()
    }

    /// `ℬ_sideᵀ(t)` embedded in a full matrix; `t` follows [`Self::side_cuts`].
    pub fn adjoint_b(&self, side: Side, t: &DVector<f64>) -> Result<DMatrix<f64>> {
        let cuts = self.side_cuts(side);
        if t.len() != cuts.len() {
            return Err(Error::Dimension(format!(
                "cut multiplier length {} but side {side} has {} cuts",
                t.len(),
                cuts.len()
            )));
        }
        let off = self.offset(side);
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for (c, &ti) in cuts.iter().zip(t.iter()) {
            c.functional(off).add_adjoint(ti, &mut out);
        }
        Ok(out)
    }

    /// W with `⟨W, Z⟩ = ⟨Ā, Z_UV⟩`.
    pub fn objective_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n_bar(), self.m_bar());
        let a = self.agg.a_bar();
        let mut w = DMatrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..m {
                w[(i, n + j)] = 0.5 * a[(i, j)];
                w[(n + j, i)] = 0.5 * a[(i, j)];
            }
        }
        w
    }

    pub fn objective(&self, z: &DMatrix<f64>) -> f64 {
        let n = self.n_bar();
        let a = self.agg.a_bar();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..self.m_bar() {
                s += a[(i, j)] * z[(i, n + j)];
            }
        }
        s
    }
}

/// The relaxation point induced by a labeling of the aggregated vertices:
/// `Z_ij = 1/√(s_p s_q)` when the clusters of i and j coincide, where `s`
/// counts original vertices per cluster on each side, and 0 otherwise.
pub fn lift_solution(
    agg: &AggregatedInstance,
    rows: &[usize],
    cols: &[usize],
) -> Result<SymMatrix> {
    let (n, m, k) = (agg.n_bar(), agg.m_bar(), agg.k());
    if rows.len() != n || cols.len() != m {
        return Err(Error::Dimension(
            "aggregated labeling has wrong length".into(),
        ));
    }
    if rows.iter().chain(cols).any(|&l| l >= k) {
        return Err(Error::InvalidArgument("label out of range".into()));
    }
    let mut su = vec![0.0; k];
    let mut sv = vec![0.0; k];
    for (c, &l) in rows.iter().enumerate() {
        su[l] += agg.sizes(Side::U)[c] as f64;
    }
    for (c, &l) in cols.iter().enumerate() {
        sv[l] += agg.sizes(Side::V)[c] as f64;
    }
    if su.iter().chain(&sv).any(|&s| s == 0.0) {
        return Err(Error::InvalidArgument(
            "labeling leaves a cluster empty".into(),
        ));
    }
    let labels: Vec<(usize, f64)> = rows
        .iter()
        .map(|&l| (l, su[l]))
        .chain(cols.iter().map(|&l| (l, sv[l])))
        .collect();
    let z = DMatrix::from_fn(n + m, n + m, |r, c| {
        let (lr, sr) = labels[r];
        let (lc, sc) = labels[c];
        if lr == lc {
            1.0 / (sr * sc).sqrt()
        } else {
            0.0
        }
    });
    Ok(SymMatrix::from_symmetric_unchecked(z))
}
