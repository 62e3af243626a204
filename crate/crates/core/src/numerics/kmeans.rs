use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;

/// Outcome of a Lloyd run: labels and the within-cluster SSE after each pass.
#[derive(Debug, Clone)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub sse_trace: Vec<f64>,
}

/// Clusters the rows of `points` into `k` non-empty groups.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    kmeans_traced(points, k, seed).map(|r| r.labels)
}

fn sq_dist(points: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, h: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(c.row(h).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn centroids(points: &DMatrix<f64>, labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(k, points.ncols());
    let mut cnt = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        let mut row = c.row_mut(l);
        row += points.row(i);
        cnt[l] += 1;
    }
    for (h, &n) in cnt.iter().enumerate() {
        if n > 0 {
            c.row_mut(h).scale_mut(1.0 / n as f64);
        }
    }
    c
}

fn sse(points: &DMatrix<f64>, labels: &[usize], c: &DMatrix<f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points, i, c, l))
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster,
/// never emptying the donor cluster.
fn repair_empty(points: &DMatrix<f64>, labels: &mut [usize], c: &DMatrix<f64>, k: usize) {
    loop {
        let mut cnt = vec![0usize; k];
        labels.iter().for_each(|&l| cnt[l] += 1);
        let Some(empty) = cnt.iter().position(|&n| n == 0) else {
            return;
        };
        let mut best: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if cnt[l] < 2 {
                continue;
            }
            let d = sq_dist(points, i, c, l);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => labels[i] = empty,
            None => return,
        }
    }
}

pub fn kmeans_traced(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::InvalidArgument(format!(
            "k-means needs at least k = {k} points, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Farthest-first seeding.
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(points, i, &points.rows(chosen[0], 1).into_owned(), 0))
        .collect();
    while chosen.len() < k {
        let mut far = 0;
        for i in 1..n {
            if nearest[i] > nearest[far] {
                far = i;
            }
        }
        chosen.push(far);
        let c = points.rows(far, 1).into_owned();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &c, 0));
        }
    }
    let mut centers = DMatrix::from_fn(k, points.ncols(), |h, j| points[(chosen[h], j)]);

    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..MAX_ITER {
        let mut next: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = 0;
                let mut bd = sq_dist(points, i, &centers, 0);
                for h in 1..k {
                    let d = sq_dist(points, i, &centers, h);
                    if d < bd {
                        bd = d;
                        best = h;
                    }
                }
                best
            })
            .collect();
        repair_empty(points, &mut next, &centers, k);
        let changed = next != labels;
        labels = next;
        centers = centroids(points, &labels, k);
        trace.push(sse(points, &labels, &centers));
        if !changed {
            break;
        }
    }
    Ok(KMeans {
        labels,
        sse_trace: trace,
    })
}
