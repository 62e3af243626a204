//! Must-link aggregation.
//!
//! Must-link components on each side collapse into single aggregated
//! vertices; cannot-links are lifted to component pairs. Solutions on the
//! aggregated vertices expand back by replicating each component's label,
//! which preserves both feasibility and the density objective.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, InfeasibleReport, Result};
use crate::model::{
    canonical_pair, Biclustering, Instance, PairwiseConstraints, Side, WeightMatrix,
};

#[derive(Debug, Clone)]
struct SideAgg {
    /// Component index of each original vertex.
    comp: Vec<usize>,
    /// Component sizes.
    sizes: Vec<usize>,
    cl: BTreeSet<(usize, usize)>,
}

impl SideAgg {
    fn build(
        size: usize,
        ml: &BTreeSet<(usize, usize)>,
        cl: &BTreeSet<(usize, usize)>,
        side: Side,
    ) -> std::result::Result<Self, InfeasibleReport> {
        let mut parent: Vec<usize> = (0..size).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(i, j) in ml {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                // keep the smaller index as root so roots are component minima
                let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                parent[hi] = lo;
            }
        }
        // Roots are visited in ascending order, so components are numbered by
        // their smallest member.
        let mut id_of_root = vec![usize::MAX; size];
        let mut comp = vec![0; size];
        let mut sizes = Vec::new();
        for v in 0..size {
            let r = find(&mut parent, v);
            if id_of_root[r] == usize::MAX {
                id_of_root[r] = sizes.len();
                sizes.push(0);
            }
            comp[v] = id_of_root[r];
            sizes[comp[v]] += 1;
        }
        let mut proj = BTreeSet::new();
        for &(i, j) in cl {
            let (ci, cj) = (comp[i], comp[j]);
            if ci == cj {
                return Err(InfeasibleReport::MustLinkConflict { side, i, j });
            }
            proj.insert(canonical_pair(ci, cj));
        }
        Ok(Self {
            comp,
            sizes,
            cl: proj,
        })
    }

    fn indicator(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.sizes.len(), self.comp.len());
        for (v, &c) in self.comp.iter().enumerate() {
            t[(c, v)] = 1.0;
        }
        t
    }

    /// Smallest original vertex in each component.
    fn representatives(&self) -> Vec<usize> {
        let mut rep = vec![usize::MAX; self.sizes.len()];
        for (v, &c) in self.comp.iter().enumerate() {
            rep[c] = rep[c].min(v);
        }
        rep
    }
}

/// An instance with must-link components collapsed.
#[derive(Debug, Clone)]
pub struct AggregatedInstance {
    a: Arc<WeightMatrix>,
    /// Original-level constraints this aggregation was built from, including
    /// any added by branching.
    base: PairwiseConstraints,
    u: SideAgg,
    v: SideAgg,
    a_bar: DMatrix<f64>,
    k: usize,
}

/// Builds the aggregated instance, or reports why no feasible biclustering exists.
pub fn aggregate(
    a: &WeightMatrix,
    con: &PairwiseConstraints,
    k: usize,
) -> std::result::Result<AggregatedInstance, InfeasibleReport> {
    AggregatedInstance::from_parts(Arc::new(a.clone()), con.clone(), k)
}

/// Convenience wrapper mapping infeasibility into [`Error::Infeasible`].
pub fn aggregate_instance(inst: &Instance) -> Result<AggregatedInstance> {
    aggregate(&inst.weights, &inst.constraints, inst.k).map_err(Error::Infeasible)
}

impl AggregatedInstance {
    fn from_parts(
        a: Arc<WeightMatrix>,
        base: PairwiseConstraints,
        k: usize,
    ) -> std::result::Result<Self, InfeasibleReport> {
        let u = SideAgg::build(a.n(), &base.ml_u, &base.cl_u, Side::U)?;
        let v = SideAgg::build(a.m(), &base.ml_v, &base.cl_v, Side::V)?;
        for (side, s) in [(Side::U, &u), (Side::V, &v)] {
            if s.sizes.len() < k {
                return Err(InfeasibleReport::TooFewComponents {
                    side,
                    components: s.sizes.len(),
                    k,
                });
            }
        }
        let mut a_bar = DMatrix::zeros(u.sizes.len(), v.sizes.len());
        let w = a.matrix();
        for i in 0..a.n() {
            for j in 0..a.m() {
                a_bar[(u.comp[i], v.comp[j])] += w[(i, j)];
            }
        }
        Ok(Self {
            a,
            base,
            u,
            v,
            a_bar,
            k,
        })
    }

    fn side(&self, side: Side) -> &SideAgg {
        match side {
            Side::U => &self.u,
            Side::V => &self.v,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of aggregated row vertices (n̄).
    pub fn n_bar(&self) -> usize {
        self.u.sizes.len()
    }

    /// Number of aggregated column vertices (m̄).
    pub fn m_bar(&self) -> usize {
        self.v.sizes.len()
    }

    pub fn dim(&self, side: Side) -> usize {
        self.side(side).sizes.len()
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.a
    }

    pub fn weights_arc(&self) -> Arc<WeightMatrix> {
        Arc::clone(&self.a)
    }

    /// Aggregated weights T_U A T_Vᵀ.
    pub fn a_bar(&self) -> &DMatrix<f64> {
        &self.a_bar
    }

    /// Component sizes e on one side.
    pub fn sizes(&self, side: Side) -> &[usize] {
        &self.side(side).sizes
    }

    /// Component of each original vertex.
    pub fn components(&self, side: Side) -> &[usize] {
        &self.side(side).comp
    }

    /// Projected cannot-link pairs (canonical, aggregated indices).
    pub fn cannot_links(&self, side: Side) -> &BTreeSet<(usize, usize)> {
        &self.side(side).cl
    }

    /// Must-link indicator matrix T (components x original vertices).
    pub fn indicator(&self, side: Side) -> DMatrix<f64> {
        self.side(side).indicator()
    }

    pub fn representatives(&self, side: Side) -> Vec<usize> {
        self.side(side).representatives()
    }

    /// Original-level constraints, including branching decisions.
    pub fn base_constraints(&self) -> &PairwiseConstraints {
        &self.base
    }

    /// Density objective of a labeling of the aggregated vertices, computed
    /// on aggregated weights with component-size weighted cluster sizes.
    pub fn aggregated_density(&self, rows: &[usize], cols: &[usize]) -> Result<f64> {
        if rows.len() != self.n_bar() || cols.len() != self.m_bar() {
            return Err(Error::Dimension(
                "aggregated labeling has wrong length".into(),
            ));
        }
        let k = self.k;
        let mut su = vec![0usize; k];
        let mut sv = vec![0usize; k];
        for (c, &l) in rows.iter().enumerate() {
            su[l] += self.u.sizes[c];
        }
        for (c, &l) in cols.iter().enumerate() {
            sv[l] += self.v.sizes[c];
        }
        let mut sums = vec![0.0; k];
        for (i, &p) in rows.iter().enumerate() {
            for (j, &q) in cols.iter().enumerate() {
                if p == q {
                    sums[p] += self.a_bar[(i, j)];
                }
            }
        }
        Ok((0..k)
            .filter(|&h| su[h] * sv[h] > 0)
            .map(|h| sums[h] / ((su[h] * sv[h]) as f64).sqrt())
            .sum())
    }

    /// Adds a cannot-link between two aggregated vertices. Fails if they are
    /// the same vertex.
    pub fn with_cannot_link(&self, side: Side, i: usize, j: usize) -> Result<Self> {
        let n = self.dim(side);
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidArgument(format!(
                "bad aggregated pair ({i}, {j})"
            )));
        }
        let rep = self.representatives(side);
        let mut base = self.base.clone();
        base.add_cannot_link(side, rep[i], rep[j]);
        let mut out = self.clone();
        out.base = base;
        let s = match side {
            Side::U => &mut out.u,
            Side::V => &mut out.v,
        };
        s.cl.insert(canonical_pair(i, j));
        Ok(out)
    }
}

/// Result of merging two aggregated vertices.
#[derive(Debug, Clone)]
pub struct Merge {
    pub agg: AggregatedInstance,
    /// `remap[old]` is the new aggregated index of old vertex `old` on the merged side.
    pub remap: Vec<usize>,
}

/// Unions components `i` and `j` on `side` and re-aggregates from scratch.
pub fn merge_components(agg: &AggregatedInstance, side: Side, i: usize, j: usize) -> Result<Merge> {
    let n = agg.dim(side);
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "bad aggregated pair ({i}, {j})"
        )));
    }
    if agg.cannot_links(side).contains(&canonical_pair(i, j)) {
        return Err(Error::InvalidArgument(format!(
            "components {i} and {j} are cannot-linked on side {side}"
        )));
    }
    let rep = agg.representatives(side);
    let mut base = agg.base.clone();
    base.add_must_link(side, rep[i], rep[j]);
    let merged = AggregatedInstance::from_parts(agg.weights_arc(), base, agg.k)
        .map_err(Error::Infeasible)?;
    let comp = merged.components(side);
    let remap = rep.iter().map(|&r| comp[r]).collect();
    Ok(Merge { agg: merged, remap })
}

/// Lifts a labeling of aggregated vertices to the original vertices.
pub fn expand(agg: &AggregatedInstance, sol_bar: &Biclustering) -> Result<Biclustering> {
    if sol_bar.rows().len() != agg.n_bar() || sol_bar.cols().len() != agg.m_bar() {
        return Err(Error::Dimension(format!(
            "aggregated solution is {}x{}, expected {}x{}",
            sol_bar.rows().len(),
            sol_bar.cols().len(),
            agg.n_bar(),
            agg.m_bar()
        )));
    }
    if sol_bar.k() != agg.k {
        return Err(Error::Dimension(format!(
            "k = {} but instance has k = {}",
            sol_bar.k(),
            agg.k
        )));
    }
    let rows = agg.u.comp.iter().map(|&c| sol_bar.rows()[c]).collect();
    let cols = agg.v.comp.iter().map(|&c| sol_bar.cols()[c]).collect();
    Biclustering::new(agg.k, rows, cols)
}

/// Lifts one side's aggregated labels to original vertices.
pub fn expand_labels(agg: &AggregatedInstance, side: Side, labels: &[usize]) -> Vec<usize> {
    agg.components(side).iter().map(|&c| labels[c]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::total_density;

    fn weights(n: usize, m: usize) -> WeightMatrix {
        WeightMatrix::new(DMatrix::from_fn(n, m, |i, j| {
            (i * m + j) as f64 * 0.5 - 1.0
        }))
        .unwrap()
    }

    #[test]
    fn transitive_closure() {
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::U, 0, 1);
        con.add_must_link(Side::U, 1, 2);
        let agg = aggregate(&weights(4, 3), &con, 2).unwrap();
        assert_eq!(agg.n_bar(), 2);
        assert_eq!(agg.sizes(Side::U), &[3, 1]);
        assert_eq!(agg.components(Side::U), &[0, 0, 0, 1]);
    }

    #[test]
    fn direct_conflict() {
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::U, 0, 1);
        con.add_cannot_link(Side::U, 0, 1);
        let err = aggregate(&weights(3, 3), &con, 2).unwrap_err();
        assert_eq!(
            err,
            InfeasibleReport::MustLinkConflict {
                side: Side::U,
                i: 0,
                j: 1
            }
        );
    }

    #[test]
    fn too_few_components() {
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::V, 0, 1);
        con.add_must_link(Side::V, 1, 2);
        let err = aggregate(&weights(3, 3), &con, 2).unwrap_err();
        assert!(matches!(
            err,
            InfeasibleReport::TooFewComponents {
                side: Side::V,
                components: 1,
                k: 2
            }
        ));
    }

    #[test]
    fn identity_aggregation() {
        let a = weights(5, 4);
        let agg = aggregate(&a, &PairwiseConstraints::new(), 2).unwrap();
        assert_eq!(agg.sizes(Side::U), &[1; 5]);
        assert_eq!(agg.a_bar(), a.matrix());
        assert_eq!(agg.indicator(Side::U), DMatrix::identity(5, 5));
        let s = Biclustering::new(2, vec![0, 1, 1, 0, 1], vec![1, 0, 0, 1]).unwrap();
        assert_eq!(expand(&agg, &s).unwrap(), s);
    }

    #[test]
    fn expand_replicates() {
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::U, 0, 1);
        let agg = aggregate(&weights(3, 2), &con, 2).unwrap();
        let s = Biclustering::new(2, vec![0, 1], vec![0, 1]).unwrap();
        let e = expand(&agg, &s).unwrap();
        assert_eq!(e.rows(), &[0, 0, 1]);
        let direct = total_density(agg.weights(), &e).unwrap();
        let via_agg = agg.aggregated_density(s.rows(), s.cols()).unwrap();
        assert!((direct - via_agg).abs() < 1e-12);
    }

    #[test]
    fn merge_adds_rows() {
        let a = weights(4, 3);
        let agg = aggregate(&a, &PairwiseConstraints::new(), 2).unwrap();
        let merged = merge_components(&agg, Side::U, 1, 3).unwrap();
        assert_eq!(merged.agg.n_bar(), 3);
        assert_eq!(merged.remap, vec![0, 1, 2, 1]);
        assert_eq!(merged.agg.sizes(Side::U), &[1, 2, 1]);
        for j in 0..3 {
            assert_eq!(merged.agg.a_bar()[(1, j)], a.get(1, j) + a.get(3, j));
        }
        assert_eq!(merged.agg.sizes(Side::V), agg.sizes(Side::V));
        assert_eq!(merged.agg.cannot_links(Side::V), agg.cannot_links(Side::V));
    }

    #[test]
    fn merge_remaps_cannot_links() {
        let mut con = PairwiseConstraints::new();
        con.add_cannot_link(Side::U, 0, 4);
        con.add_cannot_link(Side::U, 2, 3);
        let agg = aggregate(&weights(5, 3), &con, 2).unwrap();
        let merged = merge_components(&agg, Side::U, 1, 3).unwrap();
        // Recompute from scratch with the extra must-link.
        let mut con2 = con.clone();
        con2.add_must_link(Side::U, 1, 3);
        let fresh = aggregate(&weights(5, 3), &con2, 2).unwrap();
        assert_eq!(
            merged.agg.cannot_links(Side::U),
            fresh.cannot_links(Side::U)
        );
        assert!(merged.agg.cannot_links(Side::U).contains(&(1, 2)));
        assert!(merged.agg.cannot_links(Side::U).contains(&(0, 3)));
    }

    #[test]
    fn merge_rejects_cannot_linked_pair() {
        let mut con = PairwiseConstraints::new();
        con.add_cannot_link(Side::V, 0, 2);
        let agg = aggregate(&weights(3, 3), &con, 2).unwrap();
        assert!(merge_components(&agg, Side::V, 2, 0).is_err());
    }

    #[test]
    fn added_cannot_link_is_tracked() {
        let agg = aggregate(&weights(3, 3), &PairwiseConstraints::new(), 2).unwrap();
        let c = agg.with_cannot_link(Side::U, 2, 0).unwrap();
        assert!(c.cannot_links(Side::U).contains(&(0, 2)));
        assert!(c.base_constraints().cl_u.contains(&(0, 2)));
    }
}
