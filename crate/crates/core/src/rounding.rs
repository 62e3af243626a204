//! Recovers feasible biclusterings from relaxation solutions.
//!
//! Row and column profiles of `Z̃_UV` are clustered by k-means, each side's
//! reference labeling is repaired to satisfy cannot-links and non-emptiness
//! by an exact search, and column labels are finally matched to row labels
//! by a linear assignment on biclique densities.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, InfeasibleReport, Result};
use crate::model::{biclique_densities, check_feasible, total_density, Biclustering, Side};
use crate::numerics::{kmeans, solve_lap, SymMatrix};
use crate::preprocess::{expand, AggregatedInstance};

/// Agreement-maximizing repair of a reference labeling on one side.
#[derive(Debug, Clone)]
pub struct RepairProblem {
    pub side: Side,
    pub k: usize,
    /// Reference label of each row.
    pub reference: Vec<usize>,
    pub cl_pairs: BTreeSet<(usize, usize)>,
    /// Rows are branched on in descending confidence, ties by index.
    pub confidence: Vec<f64>,
}

impl RepairProblem {
    pub fn new(
        side: Side,
        k: usize,
        reference: Vec<usize>,
        cl_pairs: BTreeSet<(usize, usize)>,
    ) -> Self {
        let confidence = vec![0.0; reference.len()];
        Self {
            side,
            k,
            reference,
            cl_pairs,
            confidence,
        }
    }

    pub fn with_confidence(mut self, confidence: Vec<f64>) -> Self {
        self.confidence = confidence;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.reference.len();
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if n < self.k {
            return Err(Error::InvalidArgument(format!(
                "{n} rows cannot fill k = {} labels",
                self.k
            )));
        }
        if let Some(&l) = self.reference.iter().find(|&&l| l >= self.k) {
            return Err(Error::LabelOutOfRange {
                label: l + 1,
                k: self.k,
            });
        }
        if self.confidence.len() != n {
            return Err(Error::Dimension(
                "confidence length differs from row count".into(),
            ));
        }
        if self
            .cl_pairs
            .iter()
            .any(|&(i, j)| i == j || i >= n || j >= n)
        {
            return Err(Error::InvalidArgument(
                "cannot-link pair out of range".into(),
            ));
        }
        Ok(())
    }
}

struct Search<'a> {
    p: &'a RepairProblem,
    order: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    labels: Vec<Option<usize>>,
    /// `blocked[r][h]`: assigned CL neighbours of r holding label h.
    blocked: Vec<Vec<u32>>,
    counts: Vec<usize>,
    best: Option<(usize, Vec<usize>)>,
}

impl Search<'_> {
    fn allowed(&self, r: usize, h: usize) -> bool {
        self.blocked[r][h] == 0
    }

    fn set(&mut self, r: usize, h: usize) {
        self.labels[r] = Some(h);
        self.counts[h] += 1;
        for &s in &self.neighbors[r] {
            self.blocked[s][h] += 1;
        }
    }

    fn unset(&mut self, r: usize, h: usize) {
        self.labels[r] = None;
        self.counts[h] -= 1;
        for &s in &self.neighbors[r] {
            self.blocked[s][h] -= 1;
        }
    }

    /// Upper bound on final agreement, or `None` if the subtree is infeasible.
    fn bound(&self, depth: usize, agreement: usize) -> Option<usize> {
        let k = self.p.k;
        let rest = &self.order[depth..];
        let mut agreeable = 0;
        let mut referenced = vec![false; k];
        for &r in rest {
            if !(0..k).any(|h| self.allowed(r, h)) {
                return None;
            }
            let h = self.p.reference[r];
            if self.allowed(r, h) {
                agreeable += 1;
                referenced[h] = true;
            }
        }
        let empty: Vec<usize> = (0..k).filter(|&h| self.counts[h] == 0).collect();
        if empty.len() > rest.len() {
            return None;
        }
        let empty_referenced = empty.iter().filter(|&&h| referenced[h]).count();
        let free = rest.len() - agreeable;
        let loss = (empty.len() - empty_referenced).saturating_sub(free);
        Some(agreement + agreeable - loss.min(agreeable))
    }

    fn dfs(&mut self, depth: usize, agreement: usize) {
        let Some(ub) = self.bound(depth, agreement) else {
            return;
        };
        if self.best.as_ref().is_some_and(|(b, _)| ub <= *b) {
            return;
        }
        if depth == self.order.len() {
            let labels = self
                .labels
                .iter()
                .map(|l| l.expect("all rows assigned"))
                .collect();
            self.best = Some((agreement, labels));
            return;
        }
        let r = self.order[depth];
        let pref = self.p.reference[r];
        let candidates = std::iter::once(pref).chain((0..self.p.k).filter(|&h| h != pref));
        for h in candidates.collect::<Vec<_>>() {
            if !self.allowed(r, h) {
                continue;
            }
            self.set(r, h);
            self.dfs(depth + 1, agreement + usize::from(h == pref));
            self.unset(r, h);
        }
    }
}

/// Labeling with maximal agreement with the reference subject to cannot-links
/// and every label being used. Exact and deterministic.
pub fn repair_assignment(p: &RepairProblem) -> Result<Vec<usize>> {
    p.validate()?;
    let n = p.reference.len();
    let mut neighbors = vec![Vec::new(); n];
    for &(i, j) in &p.cl_pairs {
        neighbors[i].push(j);
        neighbors[j].push(i);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.confidence[b].total_cmp(&p.confidence[a]).then(a.cmp(&b)));
    let mut s = Search {
        p,
        order,
        neighbors,
        labels: vec![None; n],
        blocked: vec![vec![0; p.k]; n],
        counts: vec![0; p.k],
        best: None,
    };
    s.dfs(0, 0);
    s.best
        .map(|(_, labels)| labels)
        .ok_or(Error::Infeasible(InfeasibleReport::NoColoring {
            side: p.side,
        }))
}

/// Deviation of each row from the mean row.
fn deviation(points: &DMatrix<f64>) -> Vec<f64> {
    let mean = points.row_mean();
    (0..points.nrows())
        .map(|i| (points.row(i) - &mean).norm())
        .collect()
}

fn round_side(
    points: DMatrix<f64>,
    agg: &AggregatedInstance,
    side: Side,
    seed: u64,
) -> Result<Vec<usize>> {
    let k = agg.k();
    let reference = kmeans(&points, k, seed)?;
    let problem = RepairProblem::new(side, k, reference, agg.cannot_links(side).clone())
        .with_confidence(deviation(&points));
    repair_assignment(&problem)
}

/// Feasible biclustering of the original instance derived from a relaxation
/// solution on the aggregated space, with its objective value.
pub fn round_solution(
    z: &SymMatrix,
    agg: &AggregatedInstance,
    seed: u64,
) -> Result<(Biclustering, f64)> {
    let (n, m, k) = (agg.n_bar(), agg.m_bar(), agg.k());
    if z.dim() != n + m {
        return Err(Error::Dimension(format!(
            "Z has dimension {}, expected {}",
            z.dim(),
            n + m
        )));
    }
    let z_uv = z.matrix().view((0, n), (n, m)).into_owned();
    let rows_bar = round_side(z_uv.clone(), agg, Side::U, seed)?;
    let cols_bar = round_side(z_uv.transpose(), agg, Side::V, seed.wrapping_add(1))?;
    let sol = expand(agg, &Biclustering::new(k, rows_bar, cols_bar)?)?;
    let aligned = align_columns(agg.weights().matrix(), &sol)?;
    assert!(
        check_feasible(&aligned, agg.base_constraints()),
        "rounding produced an infeasible biclustering"
    );
    let obj = total_density(agg.weights(), &aligned)?;
    Ok((aligned, obj))
}

/// Relabels column clusters so that row cluster p pairs with the column
/// cluster maximizing the summed biclique densities.
pub fn align_columns(a: &DMatrix<f64>, sol: &Biclustering) -> Result<Biclustering> {
    let k = sol.k();
    let w = biclique_densities(a, sol.rows(), sol.cols(), k);
    let perm = solve_lap(&w)?;
    let mut inv = vec![0; k];
    for (p, &q) in perm.iter().enumerate() {
        inv[q] = p;
    }
    Ok(sol.permute_cols(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PairwiseConstraints, WeightMatrix};
    use crate::preprocess::aggregate;
    use crate::sdp::lift_solution;
    use proptest::prelude::*;

    fn cl(pairs: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
        pairs.iter().copied().collect()
    }

    fn agreement(a: &[usize], b: &[usize]) -> usize {
        a.iter().zip(b).filter(|(x, y)| x == y).count()
    }

    /// Exhaustive optimum over all k^n labelings.
    fn brute(p: &RepairProblem) -> Option<usize> {
        let n = p.reference.len();
        let mut best = None;
        let total = p.k.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let labels: Vec<usize> = (0..n)
                .map(|_| {
                    let l = c % p.k;
                    c /= p.k;
                    l
                })
                .collect();
            let all_used = (0..p.k).all(|h| labels.contains(&h));
            let cl_ok = p.cl_pairs.iter().all(|&(i, j)| labels[i] != labels[j]);
            if all_used && cl_ok {
                let a = agreement(&labels, &p.reference);
                best = Some(best.map_or(a, |b: usize| b.max(a)));
            }
        }
        best
    }

    #[test]
    fn unconstrained_reference_is_kept() {
        let p = RepairProblem::new(Side::U, 3, vec![2, 0, 1, 1, 0], BTreeSet::new());
        assert_eq!(repair_assignment(&p).unwrap(), vec![2, 0, 1, 1, 0]);
    }

    #[test]
    fn separates_cannot_linked_rows() {
        let p = RepairProblem::new(Side::U, 2, vec![0, 0, 1], cl(&[(0, 1)]));
        let out = repair_assignment(&p).unwrap();
        assert_ne!(out[0], out[1]);
        assert_eq!(agreement(&out, &p.reference), 2);
        assert_eq!(brute(&p), Some(2));
    }

    #[test]
    fn cl_triangle_with_two_labels_is_infeasible() {
        let p = RepairProblem::new(Side::V, 2, vec![0, 1, 0], cl(&[(0, 1), (0, 2), (1, 2)]));
        assert_eq!(
            repair_assignment(&p),
            Err(Error::Infeasible(InfeasibleReport::NoColoring {
                side: Side::V
            }))
        );
    }

    #[test]
    fn fills_empty_labels() {
        let p = RepairProblem::new(Side::U, 3, vec![0, 0, 0, 0], BTreeSet::new());
        let out = repair_assignment(&p).unwrap();
        assert_eq!(agreement(&out, &p.reference), 2);
        assert!((0..3).all(|h| out.contains(&h)));
    }

    proptest! {
        #[test]
        fn repair_is_exact(
            n in 2usize..7,
            k in 2usize..4,
            seed in any::<u64>(),
        ) {
            prop_assume!(n >= k);
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let reference: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let mut pairs = BTreeSet::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < 0.3 {
                        pairs.insert((i, j));
                    }
                }
            }
            let conf: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let p = RepairProblem::new(Side::U, k, reference, pairs).with_confidence(conf);
            match (repair_assignment(&p), brute(&p)) {
                (Ok(out), Some(best)) => {
                    prop_assert_eq!(agreement(&out, &p.reference), best);
                    prop_assert!(p.cl_pairs.iter().all(|&(i, j)| out[i] != out[j]));
                    prop_assert!((0..k).all(|h| out.contains(&h)));
                }
                (Err(_), None) => {}
                (got, want) => prop_assert!(false, "repair {:?} vs brute {:?}", got, want),
            }
        }
    }

    fn agg_of(a: DMatrix<f64>, con: PairwiseConstraints, k: usize) -> AggregatedInstance {
        aggregate(&WeightMatrix::new(a).unwrap(), &con, k).unwrap()
    }

    #[test]
    fn lifted_solution_rounds_to_same_objective() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(6, 7, |_, _| rng.random::<f64>());
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::U, 0, 4);
        con.add_cannot_link(Side::V, 1, 2);
        let agg = agg_of(a, con, 2);
        // U components: {0,4},{1},{2},{3},{5}; V: singletons
        let rows = vec![0, 1, 0, 1, 1];
        let cols = vec![1, 0, 1, 0, 0, 1, 1];
        let z = lift_solution(&agg, &rows, &cols).unwrap();
        let (sol, obj) = round_solution(&z, &agg, 1).unwrap();
        // k = 2: the better of the two column pairings of the lifted labeling
        let swapped: Vec<usize> = cols.iter().map(|&l| 1 - l).collect();
        let target = agg
            .aggregated_density(&rows, &cols)
            .unwrap()
            .max(agg.aggregated_density(&rows, &swapped).unwrap());
        assert!((obj - target).abs() < 1e-12, "{obj} vs {target}");
        assert!(check_feasible(&sol, agg.base_constraints()));
    }

    #[test]
    fn duplicated_row_blocks_split_cleanly() {
        let a = DMatrix::from_fn(4, 4, |i, j| if (i < 2) == (j < 2) { 1.0 } else { 0.0 });
        let agg = agg_of(a, PairwiseConstraints::new(), 2);
        let z = lift_solution(&agg, &[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        let (sol, obj) = round_solution(&z, &agg, 3).unwrap();
        assert_eq!(sol.rows()[0], sol.rows()[1]);
        assert_ne!(sol.rows()[0], sol.rows()[2]);
        assert!((obj - 4.0).abs() < 1e-12);
    }

    #[test]
    fn anti_diagonal_alignment_swaps_labels() {
        // W̃ = [[0,5],[5,0]] under the identity pairing.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0]);
        let sol = Biclustering::new(2, vec![0, 1], vec![0, 1]).unwrap();
        let aligned = align_columns(&a, &sol).unwrap();
        assert_eq!(aligned.cols(), &[1, 0]);
        let w = WeightMatrix::new(a).unwrap();
        assert_eq!(total_density(&w, &aligned).unwrap(), 10.0);
    }

    proptest! {
        #[test]
        fn alignment_never_hurts(seed in any::<u64>(), k in 2usize..5) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (n, m) = (k + 3, k + 4);
            let a = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>() - 0.3);
            let rows: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
            let cols: Vec<usize> = (0..m).map(|j| if j < k { j } else { rng.random_range(0..k) }).collect();
            let sol = Biclustering::new(k, rows, cols).unwrap();
            let w = WeightMatrix::new(a.clone()).unwrap();
            let aligned = align_columns(&a, &sol).unwrap();
            prop_assert!(total_density(&w, &aligned).unwrap() >= total_density(&w, &sol).unwrap() - 1e-12);
        }
    }
}
