//! Synthetic instances, constraint sampling, external validation metrics and
//! an exhaustive oracle for small instances.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, InfeasibleReport, Result};
use crate::model::{check_feasible, Biclustering, PairwiseConstraints, Side, WeightMatrix};
use crate::numerics::solve_lap;
use crate::preprocess::aggregate;

/// Largest side the oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub weights: WeightMatrix,
    pub row_truth: Vec<usize>,
    pub col_truth: Vec<usize>,
    pub k: usize,
    pub noise_sigma: f64,
}

/// Contiguous groups with sizes differing by at most one, larger groups first.
pub fn even_split(n: usize, k: usize) -> Vec<usize> {
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(n);
    for g in 0..k {
        let size = base + usize::from(g < extra);
        out.extend(std::iter::repeat_n(g, size));
    }
    out
}

/// Block-diagonal uniform weights plus Gaussian noise on every entry.
pub fn generate_planted(
    n: usize,
    m: usize,
    k: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<PlantedInstance> {
    if k < 2 || n < k || m < k {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= k <= min(n, m), got n={n}, m={m}, k={k}"
        )));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    let row_truth = even_split(n, k);
    let col_truth = even_split(m, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).expect("validated sigma");
    let mut a = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let base = if row_truth[i] == col_truth[j] {
                rng.random::<f64>()
            } else {
                0.0
            };
            let noise = if noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            a[(i, j)] = base + noise;
        }
    }
    Ok(PlantedInstance {
        weights: WeightMatrix::new(a)?,
        row_truth,
        col_truth,
        k,
        noise_sigma,
    })
}

/// Must-link and cannot-link counts per side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConstraintQuotas {
    pub ml_u: usize,
    pub cl_u: usize,
    pub ml_v: usize,
    pub cl_v: usize,
}

type PairSets = (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>);

fn sample_side(
    truth: &[usize],
    ml_quota: usize,
    cl_quota: usize,
    frac: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PairSets> {
    let n = truth.len();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(rng);
    let mut ml = Vec::new();
    let mut cl = Vec::new();
    for (i, j) in pairs {
        if ml.len() == ml_quota && cl.len() == cl_quota {
            break;
        }
        if truth[i] == truth[j] {
            if ml.len() < ml_quota {
                ml.push((i, j));
            }
        } else if cl.len() < cl_quota {
            cl.push((i, j));
        }
    }
    if ml.len() < ml_quota || cl.len() < cl_quota {
        return Err(Error::InvalidArgument(format!(
            "quota ({ml_quota}, {cl_quota}) exceeds available pairs ({}, {})",
            ml.len(),
            cl.len()
        )));
    }
    let total = ml.len() + cl.len();
    let flips = ((frac * total as f64).ceil() as usize).min(total);
    let mut tagged: Vec<((usize, usize), bool)> = ml
        .into_iter()
        .map(|p| (p, true))
        .chain(cl.into_iter().map(|p| (p, false)))
        .collect();
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(rng);
    for &t in &idx[..flips] {
        tagged[t].1 = !tagged[t].1;
    }
    let ml = tagged
        .iter()
        .filter(|(_, is_ml)| *is_ml)
        .map(|(p, _)| *p)
        .collect();
    let cl = tagged
        .iter()
        .filter(|(_, is_ml)| !*is_ml)
        .map(|(p, _)| *p)
        .collect();
    Ok((ml, cl))
}

/// Draws distinct pairs in random order, labeling each by whether the truth
/// puts its endpoints together, until the quotas are met; then flips the type
/// of `⌈violation_frac · total⌉` random constraints on each side.
pub fn sample_constraints(
    row_truth: &[usize],
    col_truth: &[usize],
    quotas: ConstraintQuotas,
    violation_frac: f64,
    seed: u64,
) -> Result<PairwiseConstraints> {
    if !(0.0..=1.0).contains(&violation_frac) {
        return Err(Error::InvalidArgument(format!(
            "violation fraction {violation_frac} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ml_u, cl_u) = sample_side(
        row_truth,
        quotas.ml_u,
        quotas.cl_u,
        violation_frac,
        &mut rng,
    )?;
    let (ml_v, cl_v) = sample_side(
        col_truth,
        quotas.ml_v,
        quotas.cl_v,
        violation_frac,
        &mut rng,
    )?;
    Ok(PairwiseConstraints {
        ml_u,
        cl_u,
        ml_v,
        cl_v,
    })
}

pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

struct Contingency {
    n: f64,
    cells: Vec<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "labelings have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    Ok(Contingency {
        n: a.len() as f64,
        cells: cells.into_values().collect(),
        rows: rows.into_values().collect(),
        cols: cols.into_values().collect(),
    })
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. When the expected and maximal indices coincide
/// (both partitions trivial) the labelings are treated as agreeing: 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let index: f64 = t.cells.iter().map(|&c| comb2(c)).sum();
    let sa: f64 = t.rows.iter().map(|&c| comb2(c)).sum();
    let sb: f64 = t.cols.iter().map(|&c| comb2(c)).sum();
    let total = comb2(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).ln())
        .sum()
}

/// Mutual information over the arithmetic mean of the entropies; 0 when
/// either labeling has a single cluster.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    if t.n == 0.0 {
        return Ok(0.0);
    }
    let (ha, hb) = (entropy(&t.rows, t.n), entropy(&t.cols, t.n));
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *pa.entry(x).or_default() += 1.0;
        *pb.entry(y).or_default() += 1.0;
        *joint.entry((x, y)).or_default() += 1.0;
    }
    let n = t.n;
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| (c / n) * ((c * n) / (pa[&x] * pb[&y])).ln())
        .sum();
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

/// Advances `labels` to the next labeling of `0..k` in base-k order; false after the last.
fn next_labeling(labels: &mut [usize], k: usize) -> bool {
    for l in labels.iter_mut() {
        *l += 1;
        if *l < k {
            return true;
        }
        *l = 0;
    }
    false
}

fn surjective(labels: &[usize], k: usize) -> bool {
    let mut used = vec![false; k];
    labels.iter().for_each(|&l| used[l] = true);
    used.into_iter().all(|u| u)
}

/// Labels appear in order of first occurrence.
fn canonical(labels: &[usize]) -> bool {
    let mut next = 0;
    for &l in labels {
        if l > next {
            return false;
        }
        if l == next {
            next += 1;
        }
    }
    true
}

fn side_feasible(labels: &[usize], side: Side, con: &PairwiseConstraints) -> bool {
    con.must_link(side)
        .iter()
        .all(|&(i, j)| labels[i] == labels[j])
        && con
            .cannot_link(side)
            .iter()
            .all(|&(i, j)| labels[i] != labels[j])
}

/// Exact optimum by enumeration: canonical surjective row labelings times all
/// surjective column labelings, each pair scored by the best label matching.
pub fn brute_force_optimum(
    a: &WeightMatrix,
    con: &PairwiseConstraints,
    k: usize,
) -> Result<(f64, Biclustering)> {
    let (n, m) = (a.n(), a.m());
    if n > BRUTE_FORCE_LIMIT || m > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard {
            n,
            m,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    con.validate(n, m)?;
    aggregate(a, con, k).map_err(Error::Infeasible)?;

    let enumerate = |len: usize, side: Side, canon: bool| {
        let mut out = Vec::new();
        let mut labels = vec![0; len];
        loop {
            if surjective(&labels, k)
                && (!canon || canonical(&labels))
                && side_feasible(&labels, side, con)
            {
                out.push(labels.clone());
            }
            if !next_labeling(&mut labels, k) {
                break;
            }
        }
        out
    };
    let row_labelings = enumerate(n, Side::U, true);
    if row_labelings.is_empty() {
        return Err(Error::Infeasible(InfeasibleReport::NoColoring {
            side: Side::U,
        }));
    }
    let col_labelings = enumerate(m, Side::V, false);
    if col_labelings.is_empty() {
        return Err(Error::Infeasible(InfeasibleReport::NoColoring {
            side: Side::V,
        }));
    }

    let w = a.matrix();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut sums = DMatrix::<f64>::zeros(k, k);
    for rows in &row_labelings {
        // Row-cluster sums per column.
        let mut rsum = DMatrix::<f64>::zeros(k, m);
        let mut ru = vec![0usize; k];
        for (i, &p) in rows.iter().enumerate() {
            ru[p] += 1;
            for j in 0..m {
                rsum[(p, j)] += w[(i, j)];
            }
        }
        for cols in &col_labelings {
            sums.fill(0.0);
            let mut cv = vec![0usize; k];
            for (j, &q) in cols.iter().enumerate() {
                cv[q] += 1;
                for p in 0..k {
                    sums[(p, q)] += rsum[(p, j)];
                }
            }
            let dens =
                DMatrix::from_fn(k, k, |p, q| sums[(p, q)] / ((ru[p] * cv[q]) as f64).sqrt());
            let perm = solve_lap(&dens)?;
            let val: f64 = perm.iter().enumerate().map(|(p, &q)| dens[(p, q)]).sum();
            if best.as_ref().is_none_or(|(b, _, _)| val > *b) {
                let mut inv = vec![0; k];
                for (p, &q) in perm.iter().enumerate() {
                    inv[q] = p;
                }
                let aligned = cols.iter().map(|&q| inv[q]).collect();
                best = Some((val, rows.clone(), aligned));
            }
        }
    }
    let (val, rows, cols) = best.expect("non-empty enumeration");
    let sol = Biclustering::new(k, rows, cols)?;
    debug_assert!(check_feasible(&sol, con));
    Ok((val, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::total_density;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn noiseless_planted_structure() {
        let p = generate_planted(7, 5, 2, 0.0, 3).unwrap();
        assert_eq!(p.row_truth, vec![0, 0, 0, 0, 1, 1, 1]);
        assert_eq!(p.col_truth, vec![0, 0, 0, 1, 1]);
        let a = p.weights.matrix();
        for i in 0..7 {
            for j in 0..5 {
                if p.row_truth[i] == p.col_truth[j] {
                    assert!((0.0..=1.0).contains(&a[(i, j)]));
                } else {
                    assert_eq!(a[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn degenerate_blocks_and_determinism() {
        let p = generate_planted(3, 3, 3, 0.25, 1).unwrap();
        assert_eq!(p.row_truth, vec![0, 1, 2]);
        assert_eq!(p, generate_planted(3, 3, 3, 0.25, 1).unwrap());
        assert_ne!(
            p.weights,
            generate_planted(3, 3, 3, 0.25, 2).unwrap().weights
        );
        assert!(generate_planted(2, 3, 3, 0.25, 1).is_err());
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(193.0 / 4.0), 48);
        assert_eq!(round_half_up(96.5), 97);
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.49), 2);
    }

    #[test]
    fn constraints_follow_truth_without_violations() {
        let truth = even_split(12, 3);
        let q = ConstraintQuotas {
            ml_u: 5,
            cl_u: 6,
            ml_v: 2,
            cl_v: 3,
        };
        let con = sample_constraints(&truth, &truth, q, 0.0, 9).unwrap();
        assert_eq!(
            (
                con.ml_u.len(),
                con.cl_u.len(),
                con.ml_v.len(),
                con.cl_v.len()
            ),
            (5, 6, 2, 3)
        );
        let sol = Biclustering::new(3, truth.clone(), truth.clone()).unwrap();
        assert!(check_feasible(&sol, &con));
    }

    #[test]
    fn full_violation_inverts_every_constraint() {
        let truth = even_split(10, 2);
        let q = ConstraintQuotas {
            ml_u: 4,
            cl_u: 4,
            ..Default::default()
        };
        let con = sample_constraints(&truth, &truth, q, 1.0, 5).unwrap();
        assert!(con.ml_u.iter().all(|&(i, j)| truth[i] != truth[j]));
        assert!(con.cl_u.iter().all(|&(i, j)| truth[i] == truth[j]));
        assert_eq!(con.total(), 8);
    }

    #[test]
    fn quota_too_large() {
        let truth = even_split(4, 2);
        let q = ConstraintQuotas {
            ml_u: 3,
            ..Default::default()
        };
        assert!(sample_constraints(&truth, &truth, q, 0.0, 0).is_err());
    }

    #[test]
    fn table_quota_at_193() {
        let c = round_half_up(193.0 / 4.0) as usize;
        assert_eq!((c, c), (48, 48));
        let truth = even_split(193, 2);
        let q = ConstraintQuotas {
            ml_u: c,
            cl_u: c,
            ..Default::default()
        };
        let con = sample_constraints(&truth, &even_split(4, 2), q, 0.0, 1).unwrap();
        assert_eq!((con.ml_u.len(), con.cl_u.len()), (48, 48));
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(ari(&[0, 0, 1, 1, 2], &[5, 5, 3, 3, 0]).unwrap(), 1.0);
        assert!(ari(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 1, 0, 1, 2], &[0, 1, 0, 1, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(nmi(&[4, 4], &[4, 4]).unwrap(), 0.0);
    }

    #[test]
    fn nmi_of_independent_labelings_is_small() {
        let mut worst: f64 = 0.0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<usize> = (0..1000).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<usize> = (0..1000).map(|_| rng.random_range(0..3)).collect();
            worst = worst.max(nmi(&a, &b).unwrap());
        }
        assert!(worst <= 0.1, "worst {worst}");
    }

    proptest! {
        #[test]
        fn metrics_symmetric_and_permutation_invariant(
            a in proptest::collection::vec(0usize..4, 2..30),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..3)).collect();
            let mut perm: Vec<usize> = (0..4).collect();
            perm.shuffle(&mut rng);
            let pa: Vec<usize> = a.iter().map(|&l| perm[l] + 10).collect();
            prop_assert!((ari(&a, &b).unwrap() - ari(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&a, &b).unwrap() - nmi(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&a, &b).unwrap() - ari(&pa, &b).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&a, &b).unwrap() - nmi(&pa, &b).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&a, &pa).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_identity_weights() {
        let a = WeightMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let (v, sol) = brute_force_optimum(&a, &PairwiseConstraints::new(), 2).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(total_density(&a, &sol).unwrap(), 2.0);
    }

    #[test]
    fn oracle_reports_preprocess_infeasibility() {
        let a = WeightMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::U, 0, 1);
        con.add_cannot_link(Side::U, 0, 1);
        assert!(matches!(
            brute_force_optimum(&a, &con, 2),
            Err(Error::Infeasible(_))
        ));
        let big = WeightMatrix::new(DMatrix::zeros(9, 2)).unwrap();
        assert!(matches!(
            brute_force_optimum(&big, &PairwiseConstraints::new(), 2),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn oracle_beats_every_labeling() {
        // Compares against a plain k^n · k^m enumeration without LAP.
        let p = generate_planted(4, 4, 2, 0.5, 17).unwrap();
        let (v, _) = brute_force_optimum(&p.weights, &PairwiseConstraints::new(), 2).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut rows = vec![0; 4];
        loop {
            let mut cols = vec![0; 4];
            loop {
                if let Ok(sol) = Biclustering::new(2, rows.clone(), cols.clone()) {
                    best = best.max(total_density(&p.weights, &sol).unwrap());
                }
                if !next_labeling(&mut cols, 2) {
                    break;
                }
            }
            if !next_labeling(&mut rows, 2) {
                break;
            }
        }
        assert!((v - best).abs() < 1e-12, "{v} vs {best}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn constraints_never_raise_oracle(seed in any::<u64>()) {
            let p = generate_planted(5, 4, 2, 0.25, seed).unwrap();
            let q = ConstraintQuotas { ml_u: 1, cl_u: 1, ml_v: 1, cl_v: 1 };
            let con = sample_constraints(&p.row_truth, &p.col_truth, q, 0.0, seed).unwrap();
            let mut partial = PairwiseConstraints::new();
            partial.ml_u = con.ml_u.clone();
            partial.cl_v = con.cl_v.clone();
            let free = brute_force_optimum(&p.weights, &PairwiseConstraints::new(), 2).unwrap().0;
            let mid = brute_force_optimum(&p.weights, &partial, 2).unwrap().0;
            let full = brute_force_optimum(&p.weights, &con, 2).unwrap().0;
            prop_assert!(mid <= free + 1e-12 && full <= mid + 1e-12);
        }
    }
}
