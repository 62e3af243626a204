//! Dense linear algebra and combinatorial kernels shared by the solvers.

mod kmeans;
mod lap;
mod ldl;

pub use kmeans::{kmeans, kmeans_traced, KMeans};
pub use lap::{lap_exhaustive, lap_hungarian, solve_lap};
pub use ldl::SemidefiniteLdl;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric matrix, symmetrized by averaging on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    /// Wraps a matrix already known to be exactly symmetric.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }
}

const EIG_MAX_ITER: usize = 10_000;

pub fn sym_eig(m: &SymMatrix) -> Result<Eigen> {
    let a = m.matrix();
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let n = m.dim();
    if n == 0 {
        return Ok(Eigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::EigenNonConvergence { residual: f64::NAN })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let out = Eigen { values, vectors };
    let residual = (out.reconstruct() - a).norm();
    if residual > 1e-8 * (1.0 + a.norm()) {
        return Err(Error::EigenNonConvergence { residual });
    }
    Ok(out)
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn project_psd(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    Ok(psd_part(&eig))
}

/// Rebuilds V max(Λ, 0) Vᵀ from an eigendecomposition.
pub(crate) fn psd_part(eig: &Eigen) -> SymMatrix {
    let n = eig.values.len();
    let mut out = DMatrix::zeros(n, n);
    for (c, &lam) in eig.values.iter().enumerate() {
        if lam <= 0.0 {
            break;
        }
        let v = eig.vectors.column(c);
        out.ger(lam, &v, &v, 1.0);
    }
    let sym = (&out + out.transpose()) * 0.5;
    SymMatrix::from_symmetric_unchecked(sym)
}

/// Entrywise clamp to `[lo, hi]`.
pub fn project_box(m: &DMatrix<f64>, lo: f64, hi: f64) -> DMatrix<f64> {
    m.map(|x| x.clamp(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymMatrix::new(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn identity_eigenvalues() {
        let e = sym_eig(&SymMatrix::new(DMatrix::identity(3, 3)).unwrap()).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_eigenpairs() {
        let d =
            SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]))).unwrap();
        let e = sym_eig(&d).unwrap();
        assert_eq!(e.values.as_slice(), &[2.0, -1.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 1)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        for seed in 0..5 {
            let m = random_sym(8, seed);
            let e = sym_eig(&m).unwrap();
            let err = (e.reconstruct() - m.matrix()).norm();
            assert!(err <= 1e-8 * (1.0 + m.matrix().norm()));
            let gram = e.vectors.transpose() * &e.vectors;
            assert!((gram - DMatrix::<f64>::identity(8, 8)).norm() < 1e-8);
            assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn non_square_rejected() {
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn psd_fixed_point_and_clamp() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = SymMatrix::new(&b * b.transpose()).unwrap();
        assert!((project_psd(&p).unwrap().matrix() - p.matrix()).norm() < 1e-8);

        let d =
            SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0]))).unwrap();
        let pd = project_psd(&d).unwrap();
        assert!(
            (pd.matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).norm()
                < 1e-12
        );
    }

    #[test]
    fn psd_projection_orthogonality() {
        for seed in 10..15 {
            let m = random_sym(7, seed);
            let p = project_psd(&m).unwrap();
            let resid = m.matrix() - p.matrix();
            assert!(resid.dot(p.matrix()).abs() < 1e-10);
            let e = sym_eig(&p).unwrap();
            assert!(e.values.min() >= -1e-8);
        }
    }

    #[test]
    fn box_projection() {
        let half = DMatrix::from_element(2, 2, 0.5);
        assert_eq!(project_box(&half, 0.0, 1.0), half);
        let neg = DMatrix::from_element(1, 1, -3.0);
        assert_eq!(project_box(&neg, 0.0, 1.0)[(0, 0)], 0.0);
        let m = random_sym(5, 3).into_inner() * 3.0;
        let once = project_box(&m, -1.0, 0.5);
        assert_eq!(project_box(&once, -1.0, 0.5), once);
    }
}
