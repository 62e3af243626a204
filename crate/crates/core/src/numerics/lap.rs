use nalgebra::DMatrix;

use crate::error::{Error, Result};

const EXHAUSTIVE_MAX: usize = 8;

/// Permutation `p` (row i assigned to column p[i]) maximizing Σ W[i, p[i]].
pub fn solve_lap(w: &DMatrix<f64>) -> Result<Vec<usize>> {
    if w.nrows() != w.ncols() {
        return Err(Error::Dimension(format!(
            "LAP needs a square matrix, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if w.nrows() <= EXHAUSTIVE_MAX {
        Ok(lap_exhaustive(w))
    } else {
        Ok(lap_hungarian(w))
    }
}

fn value(w: &DMatrix<f64>, p: &[usize]) -> f64 {
    p.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum()
}

/// Enumerates all permutations; the lexicographically first maximizer wins.
pub fn lap_exhaustive(w: &DMatrix<f64>) -> Vec<usize> {
    let k = w.nrows();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_val = value(w, &perm);
    // Lexicographic next-permutation walk.
    while let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) {
        let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
        let v = value(w, &perm);
        if v > best_val {
            best_val = v;
            best.copy_from_slice(&perm);
        }
    }
    best
}

/// O(k³) shortest augmenting path (Hungarian) method.
pub fn lap_hungarian(w: &DMatrix<f64>) -> Vec<usize> {
    let n = w.nrows();
    // minimize cost = -w, 1-based potentials as in the classic formulation
    let cost = |i: usize, j: usize| -w[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(w: &DMatrix<f64>) -> f64 {
        fn rec(w: &DMatrix<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == w.nrows() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for j in 0..w.ncols() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(w[(row, j)] + rec(w, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(w, 0, &mut vec![false; w.ncols()])
    }

    #[test]
    fn identity_matrix() {
        let w = DMatrix::identity(4, 4);
        let p = solve_lap(&w).unwrap();
        assert_eq!(p, vec![0, 1, 2, 3]);
        assert_eq!(value(&w, &p), 4.0);
    }

    #[test]
    fn forced_off_diagonal() {
        let w = DMatrix::from_row_slice(3, 3, &[0.0, 9.0, 0.0, 0.0, 0.0, 9.0, 9.0, 0.0, 0.0]);
        assert_eq!(solve_lap(&w).unwrap(), vec![1, 2, 0]);
        assert_eq!(lap_hungarian(&w), vec![1, 2, 0]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for size in [5usize, 6, 9, 11] {
            for _ in 0..10 {
                let w = DMatrix::from_fn(size, size, |_, _| rng.random_range(-5.0..5.0));
                let b = brute(&w);
                let h = lap_hungarian(&w);
                assert!((value(&w, &h) - b).abs() < 1e-9);
                if size <= 8 {
                    assert!((value(&w, &lap_exhaustive(&w)) - b).abs() < 1e-12);
                }
                let ident: Vec<usize> = (0..size).collect();
                assert!(value(&w, &solve_lap(&w).unwrap()) >= value(&w, &ident) - 1e-12);
            }
        }
    }

    #[test]
    fn non_square() {
        assert!(solve_lap(&DMatrix::zeros(2, 3)).is_err());
    }
}
