use nalgebra::{DMatrix, DVector};

/// LDLᵀ factorization of a symmetric positive semidefinite matrix that
/// drops numerically zero pivots. For a right-hand side in the range of the
/// matrix, [`SemidefiniteLdl::solve`] returns an exact solution.
#[derive(Debug, Clone)]
pub struct SemidefiniteLdl {
    l: DMatrix<f64>,
    d: Vec<f64>,
}

impl SemidefiniteLdl {
    pub fn new(g: &DMatrix<f64>) -> Self {
        let n = g.nrows();
        let scale = (0..n).map(|i| g[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
        let tol = 1e-11 * scale;
        let mut l = DMatrix::identity(n, n);
        let mut d = vec![0.0; n];
        // Column-oriented: work[i] holds L[i, j] * d[j] before division.
        for j in 0..n {
            let mut dj = g[(j, j)];
            for p in 0..j {
                dj -= l[(j, p)] * l[(j, p)] * d[p];
            }
            if dj <= tol {
                d[j] = 0.0;
                for i in j + 1..n {
                    l[(i, j)] = 0.0;
                }
                continue;
            }
            d[j] = dj;
            for i in j + 1..n {
                let mut s = g[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)] * d[p];
                }
                l[(i, j)] = s / dj;
            }
        }
        Self { l, d }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of pivots dropped as numerically zero.
    pub fn deficiency(&self) -> usize {
        self.d.iter().filter(|&&x| x == 0.0).count()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for p in 0..i {
                s -= self.l[(i, p)] * y[p];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] = if self.d[i] > 0.0 {
                y[i] / self.d[i]
            } else {
                0.0
            };
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s -= self.l[(p, i)] * y[p];
            }
            y[i] = s;
        }
        y
    }
}
