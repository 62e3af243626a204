use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Side;
use crate::numerics::{sym_eig, SymMatrix};

use super::relaxation::DnnRelaxation;

/// Multipliers of the dual relaxation.
///
/// `tau_*` follow the order of the projected cannot-link set, `t_*` the
/// order of that side's cuts in the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEstimate {
    pub y_u: DVector<f64>,
    pub y_v: DVector<f64>,
    pub alpha_u: f64,
    pub alpha_v: f64,
    pub tau_u: DVector<f64>,
    pub tau_v: DVector<f64>,
    pub t_u: DVector<f64>,
    pub t_v: DVector<f64>,
    pub q: DMatrix<f64>,
}

impl DualEstimate {
    /// All-zero multipliers shaped for `rel`.
    pub fn zeros(rel: &DnnRelaxation) -> Self {
        let d = rel.dim();
        Self {
            y_u: DVector::zeros(rel.n_bar()),
            y_v: DVector::zeros(rel.m_bar()),
            alpha_u: 0.0,
            alpha_v: 0.0,
            tau_u: DVector::zeros(rel.agg.cannot_links(Side::U).len()),
            tau_v: DVector::zeros(rel.agg.cannot_links(Side::V).len()),
            t_u: DVector::zeros(rel.cuts.count(Side::U)),
            t_v: DVector::zeros(rel.cuts.count(Side::V)),
            q: DMatrix::zeros(d, d),
        }
    }

    /// `λ_side = [y; α; τ]`.
    pub fn lambda(&self, side: Side) -> DVector<f64> {
        let (y, a, tau) = match side {
            Side::U => (&self.y_u, self.alpha_u, &self.tau_u),
            Side::V => (&self.y_v, self.alpha_v, &self.tau_v),
        };
        let mut out = DVector::zeros(y.len() + 1 + tau.len());
        out.rows_mut(0, y.len()).copy_from(y);
        out[y.len()] = a;
        out.rows_mut(y.len() + 1, tau.len()).copy_from(tau);
        out
    }

    /// `bᵀλ`, the dual objective.
    pub fn dual_objective(&self, k: usize) -> f64 {
        self.y_u.sum() + self.y_v.sum() + k as f64 * (self.alpha_u + self.alpha_v)
    }

    fn check(&self, rel: &DnnRelaxation) -> Result<()> {
        let d = rel.dim();
        let shapes = [
            (self.y_u.len(), rel.n_bar(), "y_u"),
            (self.y_v.len(), rel.m_bar(), "y_v"),
            (
                self.tau_u.len(),
                rel.agg.cannot_links(Side::U).len(),
                "tau_u",
            ),
            (
                self.tau_v.len(),
                rel.agg.cannot_links(Side::V).len(),
                "tau_v",
            ),
            (self.t_u.len(), rel.cuts.count(Side::U), "t_u"),
            (self.t_v.len(), rel.cuts.count(Side::V), "t_v"),
            (self.q.nrows(), d, "q rows"),
            (self.q.ncols(), d, "q cols"),
        ];
        for (got, want, name) in shapes {
            if got != want {
                return Err(Error::Dimension(format!(
                    "{name}: length {got}, expected {want}"
                )));
            }
        }
        if self
            .t_u
            .iter()
            .chain(self.t_v.iter())
            .any(|&t| t < 0.0 || t.is_nan())
        {
            return Err(Error::InvalidArgument(
                "cut multipliers must be nonnegative".into(),
            ));
        }
        if self.q.iter().any(|&x| x < 0.0 || x.is_nan()) {
            return Err(Error::InvalidArgument(
                "Q must be entrywise nonnegative".into(),
            ));
        }
        if (&self.q - self.q.transpose()).amax() > 0.0 {
            return Err(Error::InvalidArgument("Q must be symmetric".into()));
        }
        Ok(())
    }
}

/// `S̃ = 𝒜ᵀ(λ) + ℬᵀ(t) − W − Q` on the full matrix, so that
/// `S̃_UV = −Ā/2 − Q_UV` under the Frobenius inner product on symmetric matrices.
pub fn dual_slack(dual: &DualEstimate, rel: &DnnRelaxation) -> Result<SymMatrix> {
    dual.check(rel)?;
    let mut s = rel.adjoint_a(Side::U, &dual.lambda(Side::U))?;
    s += rel.adjoint_a(Side::V, &dual.lambda(Side::V))?;
    s += rel.adjoint_b(Side::U, &dual.t_u)?;
    s += rel.adjoint_b(Side::V, &dual.t_v)?;
    s -= rel.objective_matrix();
    s -= &dual.q;
    SymMatrix::new(s)
}

/// Upper bound on `λ_max(Z)` over all feasible Z: `1/min e_U + 1/min e_V`.
pub fn d_min(rel: &DnnRelaxation) -> f64 {
    let min_u = rel.agg.sizes(Side::U).iter().copied().min().unwrap_or(1);
    let min_v = rel.agg.sizes(Side::V).iter().copied().min().unwrap_or(1);
    1.0 / min_u as f64 + 1.0 / min_v as f64
}

/// Certified upper bound on the relaxation optimum from arbitrary multipliers
/// with `t ≥ 0` and `Q ≥ 0`: the dual objective plus `d_min` times the
/// magnitude of the negative spectrum of S̃.
pub fn safe_upper_bound(dual: &DualEstimate, rel: &DnnRelaxation) -> Result<f64> {
    let s = dual_slack(dual, rel)?;
    let eig = sym_eig(&s)?;
    let neg: f64 = eig.values.iter().filter(|&&l| l < 0.0).sum();
    Ok(dual.dual_objective(rel.agg.k()) - d_min(rel) * neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PairwiseConstraints, WeightMatrix};
    use crate::preprocess::aggregate;
    use crate::sdp::relaxation::lift_solution;

    fn rel_for(a: DMatrix<f64>, con: PairwiseConstraints) -> DnnRelaxation {
        DnnRelaxation::new(aggregate(&WeightMatrix::new(a).unwrap(), &con, 2).unwrap())
    }

    #[test]
    fn unit_sizes_give_d_min_two() {
        let rel = rel_for(DMatrix::from_element(3, 4, 1.0), PairwiseConstraints::new());
        assert_eq!(d_min(&rel), 2.0);
    }

    #[test]
    fn merged_sizes_shrink_d_min() {
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::U, 0, 1);
        con.add_must_link(Side::U, 2, 3);
        let rel = rel_for(DMatrix::from_element(4, 3, 1.0), con);
        assert_eq!(d_min(&rel), 0.5 + 1.0);
    }

    #[test]
    fn psd_slack_has_no_correction() {
        // Zero weights: y = 0, α = 0 with Q = 0 gives S̃ = 0.
        let rel = rel_for(DMatrix::zeros(3, 3), PairwiseConstraints::new());
        let dual = DualEstimate::zeros(&rel);
        assert_eq!(safe_upper_bound(&dual, &rel).unwrap(), 0.0);
    }

    #[test]
    fn negative_multipliers_rejected() {
        let rel = rel_for(DMatrix::zeros(3, 3), PairwiseConstraints::new());
        let mut dual = DualEstimate::zeros(&rel);
        dual.q[(0, 1)] = -1.0;
        dual.q[(1, 0)] = -1.0;
        assert!(matches!(
            safe_upper_bound(&dual, &rel),
            Err(Error::InvalidArgument(_))
        ));
        let mut dual = DualEstimate::zeros(&rel);
        dual.y_u = DVector::zeros(2);
        assert!(matches!(
            safe_upper_bound(&dual, &rel),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn weak_duality_against_lifted_points() {
        // For any multipliers, ⟨W, Z⟩ ≤ bound at every feasible lifted Z.
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(4, 3, |_, _| rng.random::<f64>());
            let rel = rel_for(a, PairwiseConstraints::new());
            let mut dual = DualEstimate::zeros(&rel);
            dual.y_u = DVector::from_fn(4, |_, _| rng.random::<f64>());
            dual.y_v = DVector::from_fn(3, |_, _| rng.random::<f64>());
            dual.alpha_u = rng.random::<f64>() - 0.5;
            let ub = safe_upper_bound(&dual, &rel).unwrap();
            let z = lift_solution(&rel.agg, &[0, 1, 0, 1], &[1, 0, 0]).unwrap();
            assert!(rel.objective(z.matrix()) <= ub + 1e-9);
        }
    }
}
