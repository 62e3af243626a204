//! Instances, pairwise constraints, biclusterings and the density objective.
//!
//! Vertex indices and cluster labels are 0-based in memory. The text formats
//! in [`crate::format`] use 1-based indices and labels.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which end of the bipartite graph: rows (`U`) or columns (`V`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    U,
    V,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::U => f.write_str("U"),
            Side::V => f.write_str("V"),
        }
    }
}

/// Edge weights of the complete bipartite graph K_{n,m}; entry (i, j) is the
/// weight between row vertex i and column vertex j.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    a: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "weight matrix must be at least 1x1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some(bad) = a.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite weight {bad}")));
        }
        Ok(Self { a })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged weight rows".into()));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }
}

/// Canonical unordered vertex pair `(min, max)`.
pub fn canonical_pair(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Must-link and cannot-link sets on both sides. Pairs are stored canonically.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairwiseConstraints {
    pub ml_u: BTreeSet<(usize, usize)>,
    pub cl_u: BTreeSet<(usize, usize)>,
    pub ml_v: BTreeSet<(usize, usize)>,
    pub cl_v: BTreeSet<(usize, usize)>,
}

impl PairwiseConstraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn must_link(&self, side: Side) -> &BTreeSet<(usize, usize)> {
        match side {
            Side::U => &self.ml_u,
            Side::V => &self.ml_v,
        }
    }

    pub fn cannot_link(&self, side: Side) -> &BTreeSet<(usize, usize)> {
        match side {
            Side::U => &self.cl_u,
            Side::V => &self.cl_v,
        }
    }

    pub fn add_must_link(&mut self, side: Side, i: usize, j: usize) {
        let set = match side {
            Side::U => &mut self.ml_u,
            Side::V => &mut self.ml_v,
        };
        set.insert(canonical_pair(i, j));
    }

    pub fn add_cannot_link(&mut self, side: Side, i: usize, j: usize) {
        let set = match side {
            Side::U => &mut self.cl_u,
            Side::V => &mut self.cl_v,
        };
        set.insert(canonical_pair(i, j));
    }

    pub fn total(&self) -> usize {
        self.ml_u.len() + self.cl_u.len() + self.ml_v.len() + self.cl_v.len()
    }

    /// Checks self-pairs and index ranges for an `n x m` instance.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        for (side, size) in [(Side::U, n), (Side::V, m)] {
            for &(i, j) in self.must_link(side).iter().chain(self.cannot_link(side)) {
                if i == j {
                    return Err(Error::InvalidArgument(format!(
                        "self-pair ({}, {}) on side {side}",
                        i + 1,
                        j + 1
                    )));
                }
                if j >= size {
                    return Err(Error::InvalidArgument(format!(
                        "pair ({}, {}) out of range on side {side} (size {size})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A partition of rows and of columns into `k` labels; label `h` on both
/// sides forms biclique `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Biclustering {
    k: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Biclustering {
    pub fn new(k: usize, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
        }
        for (side, labels) in [(Side::U, &rows), (Side::V, &cols)] {
            let mut used = vec![false; k];
            for &l in labels {
                if l >= k {
                    return Err(Error::LabelOutOfRange { label: l + 1, k });
                }
                used[l] = true;
            }
            if let Some(h) = used.iter().position(|u| !u) {
                return Err(Error::EmptyCluster(h + 1, side));
            }
        }
        Ok(Self { k, rows, cols })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn labels(&self, side: Side) -> &[usize] {
        match side {
            Side::U => &self.rows,
            Side::V => &self.cols,
        }
    }

    /// Binary assignment matrix X (one row per vertex, one column per label).
    pub fn assignment(&self, side: Side) -> DMatrix<f64> {
        assignment_matrix(self.labels(side), self.k)
    }

    /// Cluster sizes on one side.
    pub fn sizes(&self, side: Side) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in self.labels(side) {
            s[l] += 1;
        }
        s
    }

    /// Applies `perm[old] = new` to the column labels.
    pub fn permute_cols(&self, perm: &[usize]) -> Self {
        Self {
            k: self.k,
            rows: self.rows.clone(),
            cols: self.cols.iter().map(|&l| perm[l]).collect(),
        }
    }

    /// Applies the same label permutation to both sides.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        Self {
            k: self.k,
            rows: self.rows.iter().map(|&l| perm[l]).collect(),
            cols: self.cols.iter().map(|&l| perm[l]).collect(),
        }
    }
}

pub fn assignment_matrix(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        x[(i, l)] = 1.0;
    }
    x
}

/// Sum of biclique densities: for each label, total weight of its biclique
/// divided by the square root of its edge count.
pub fn total_density(a: &WeightMatrix, sol: &Biclustering) -> Result<f64> {
    if sol.rows.len() != a.n() || sol.cols.len() != a.m() {
        return Err(Error::Dimension(format!(
            "solution is {}x{}, instance is {}x{}",
            sol.rows.len(),
            sol.cols.len(),
            a.n(),
            a.m()
        )));
    }
    Ok(biclique_densities(a.matrix(), &sol.rows, &sol.cols, sol.k)
        .diagonal()
        .sum())
}

/// The k x k matrix whose (p, q) entry is the density of the biclique formed
/// by row cluster p and column cluster q. Empty clusters yield zero entries.
pub fn biclique_densities(
    a: &DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    k: usize,
) -> DMatrix<f64> {
    let mut sums = DMatrix::<f64>::zeros(k, k);
    for (i, &p) in rows.iter().enumerate() {
        for (j, &q) in cols.iter().enumerate() {
            sums[(p, q)] += a[(i, j)];
        }
    }
    let mut ru = vec![0usize; k];
    let mut cv = vec![0usize; k];
    rows.iter().for_each(|&l| ru[l] += 1);
    cols.iter().for_each(|&l| cv[l] += 1);
    DMatrix::from_fn(k, k, |p, q| {
        let edges = ru[p] * cv[q];
        if edges == 0 {
            0.0
        } else {
            sums[(p, q)] / (edges as f64).sqrt()
        }
    })
}

/// True iff every must-link pair shares a label and every cannot-link pair
/// does not, on both sides. Pairs referring to vertices outside the labeling
/// count as violated.
pub fn check_feasible(sol: &Biclustering, con: &PairwiseConstraints) -> bool {
    [Side::U, Side::V].iter().all(|&side| {
        let labels = sol.labels(side);
        let get = |i: usize| labels.get(i).copied();
        con.must_link(side)
            .iter()
            .all(|&(i, j)| matches!((get(i), get(j)), (Some(a), Some(b)) if a == b))
            && con
                .cannot_link(side)
                .iter()
                .all(|&(i, j)| matches!((get(i), get(j)), (Some(a), Some(b)) if a != b))
    })
}

/// A complete problem: weights, constraints and the number of bicliques.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub weights: WeightMatrix,
    pub constraints: PairwiseConstraints,
    pub k: usize,
}

impl Instance {
    pub fn new(weights: WeightMatrix, constraints: PairwiseConstraints, k: usize) -> Result<Self> {
        constraints.validate(weights.n(), weights.m())?;
        if k < 2 {
            return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
        }
        Ok(Self {
            weights,
            constraints,
            k,
        })
    }
}
