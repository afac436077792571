//! Lowest eigenpairs of symmetric tridiagonal operators via Sturm bisection
//! and inverse iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::GridSpec;
use crate::operators::TridiagonalOperator;

/// Number of eigenvalues strictly below `lambda`.
pub fn sturm_count(t: &TridiagonalOperator, lambda: f64) -> usize {
    let pivmin = f64::EPSILON * t.scale().max(f64::MIN_POSITIVE);
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..t.n() {
        let b2 = if i == 0 { 0.0 } else { t.offdiag[i - 1].powi(2) };
        d = t.diag[i] - lambda - b2 / d;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `index`-th smallest eigenvalue (0-based), bisected to floating resolution.
pub fn bisect_eigenvalue(t: &TridiagonalOperator, index: usize) -> f64 {
    let (glo, ghi) = t.gershgorin();
    let pad = f64::EPSILON * t.scale() * 4.0 + f64::MIN_POSITIVE;
    let mut lo = glo - pad;
    let mut hi = ghi + pad;
    // invariant: count(lo) <= index < count(hi)
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(t, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `k` smallest eigenvalues, ascending.
pub fn lowest_eigenvalues(t: &TridiagonalOperator, k: usize) -> Vec<f64> {
    (0..k.min(t.n())).map(|i| bisect_eigenvalue(t, i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit norm in the h-weighted discrete inner product.
    pub vector: Vec<f64>,
}

const MAX_INVERSE_ITERATIONS: usize = 4;
const CLUSTER_GAP: f64 = 1e-8;

/// `(T − λI) x = b` by Gaussian elimination with partial pivoting.
fn shifted_solve(t: &TridiagonalOperator, lambda: f64, b: &[f64]) -> Vec<f64> {
    let n = t.n();
    let tiny = f64::EPSILON * t.scale().max(f64::MIN_POSITIVE);
    // row i holds (l, d, u1, u2) in the upper-triangular factor
    let mut d: Vec<f64> = t.diag.iter().map(|a| a - lambda).collect();
    let mut u1: Vec<f64> = t.offdiag.clone();
    u1.push(0.0);
    let mut u2 = vec![0.0; n];
    let mut sub: Vec<f64> = t.offdiag.clone();
    let mut x = b.to_vec();
    for i in 0..n.saturating_sub(1) {
        // rows i and i+1 compete for the pivot in column i
        if sub[i].abs() > d[i].abs() {
            // swap rows i and i+1
            let (ri_d, ri_u1, ri_u2) = (d[i], u1[i], u2[i]);
            d[i] = sub[i];
            u1[i] = d[i + 1];
            u2[i] = u1[i + 1];
            let l = ri_d / d[i];
            d[i + 1] = ri_u1 - l * u1[i];
            u1[i + 1] = ri_u2 - l * u2[i];
            x.swap(i, i + 1);
            x[i + 1] -= l * x[i];
        } else {
            if d[i].abs() < tiny {
                d[i] = tiny;
            }
            let l = sub[i] / d[i];
            d[i + 1] -= l * u1[i];
            u1[i + 1] -= l * u2[i];
            x[i + 1] -= l * x[i];
        }
        sub[i] = 0.0;
    }
    if d[n - 1].abs() < tiny {
        d[n - 1] = tiny;
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    x
}

fn dot(h: f64, a: &[f64], b: &[f64]) -> f64 {
    h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

fn normalize(h: f64, v: &mut [f64]) {
    let nrm = dot(h, v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|a| *a /= nrm);
    }
}

/// Largest relative residual `‖Tψ − λψ‖ / ‖ψ‖` allowed before giving up.
fn stall_threshold(t: &TridiagonalOperator) -> f64 {
    1e-10 * t.scale().max(1.0)
}

pub fn residual(t: &TridiagonalOperator, pair: &EigenPair) -> f64 {
    let tv = t.apply(&pair.vector);
    let num: f64 = tv
        .iter()
        .zip(&pair.vector)
        .map(|(a, v)| (a - pair.value * v).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = pair.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den
}

/// The `k` lowest eigenpairs. Vectors in near-degenerate clusters are
/// orthogonalized against each other during the iteration.
pub fn lowest_eigenpairs(t: &TridiagonalOperator, k: usize) -> Result<Vec<EigenPair>> {
    let n = t.n();
    if k == 0 || k > n {
        return Err(Error::Param(format!("need 1 <= k <= {n}, got {k}")));
    }
    let h = t.grid.h();
    let scale = t.scale();
    let values = lowest_eigenvalues(t, k);
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
    let mut cluster_start = 0;
    for (level, &lambda) in values.iter().enumerate() {
        if level > 0 && (lambda - values[level - 1]).abs() >= CLUSTER_GAP * scale {
            cluster_start = level;
        }
        // Deterministic, non-symmetric start vector.
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.7548776662466927).fract())
            .collect();
        normalize(h, &mut v);
        let mut res = f64::INFINITY;
        for _ in 0..MAX_INVERSE_ITERATIONS {
            let mut w = shifted_solve(t, lambda, &v);
            for p in &pairs[cluster_start..] {
                let c = dot(h, &w, &p.vector);
                w.iter_mut().zip(&p.vector).for_each(|(a, b)| *a -= c * b);
            }
            normalize(h, &mut w);
            v = w;
            res = residual(
                t,
                &EigenPair {
                    value: lambda,
                    vector: v.clone(),
                },
            );
            if res <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        if !(res <= stall_threshold(t)) {
            return Err(Error::IterationStall { level });
        }
        // Sign convention: largest component positive.
        let big = v.iter().fold(0.0f64, |m, a| if a.abs() > m.abs() { *a } else { m });
        if big < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        pairs.push(EigenPair {
            value: lambda,
            vector: v,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub label_a: String,
    pub label_b: String,
    pub eigs_a: Vec<f64>,
    pub eigs_b: Vec<f64>,
    pub per_level_abs_diff: Vec<f64>,
    pub per_level_rel_diff: Vec<f64>,
    pub k: usize,
    pub grid_a: GridSpec,
    pub grid_b: GridSpec,
}

impl SpectrumReport {
    pub fn max_rel_diff(&self) -> f64 {
        self.per_level_rel_diff.iter().fold(0.0, |m, v| m.max(*v))
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-30)
}

/// Compare the `k` lowest levels of two operators, possibly on different grids.
pub fn spectrum_compare(a: &TridiagonalOperator, b: &TridiagonalOperator, k: usize) -> SpectrumReport {
    let k = k.min(a.n()).min(b.n());
    let eigs_a = lowest_eigenvalues(a, k);
    let eigs_b = lowest_eigenvalues(b, k);
    let per_level_abs_diff = eigs_a.iter().zip(&eigs_b).map(|(x, y)| (x - y).abs()).collect();
    let per_level_rel_diff = eigs_a.iter().zip(&eigs_b).map(|(x, y)| rel_diff(*x, *y)).collect();
    SpectrumReport {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        eigs_a,
        eigs_b,
        per_level_abs_diff,
        per_level_rel_diff,
        k,
        grid_a: a.grid,
        grid_b: b.grid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::operators::{hamiltonian_bdd, hamiltonian_constant};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn op(diag: Vec<f64>, off: Vec<f64>) -> TridiagonalOperator {
        let n = diag.len();
        TridiagonalOperator::new(diag, off, GridSpec::new(0.0, 1.0, n).unwrap(), "t").unwrap()
    }

    fn harmonic(grid: &GridSpec) -> TridiagonalOperator {
        let v = ScalarField::analytic("x^2/2", crate::fields::Domain::REAL_LINE, |x| Ok(x.powi(2).scale(0.5)));
        hamiltonian_constant(&v, grid).unwrap()
    }

    #[test]
    fn diagonal_counts() {
        let t = op(vec![1.0, 2.0, 3.0], vec![0.0, 0.0]);
        assert_eq!(sturm_count(&t, 2.5), 2);
        let (lo, hi) = t.gershgorin();
        assert_eq!(sturm_count(&t, lo - 1.0), 0);
        assert_eq!(sturm_count(&t, hi + 1.0), 3);
        assert_eq!(sturm_count(&t, f64::INFINITY), 3);
    }

    #[test]
    fn diagonal_pairs() {
        let t = op(vec![1.0, 2.0, 3.0], vec![0.0, 0.0]);
        let pairs = lowest_eigenpairs(&t, 2).unwrap();
        assert_relative_eq!(pairs[0].value, 1.0, epsilon = 1e-14);
        assert_relative_eq!(pairs[1].value, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let t = op(vec![1.0, 2.0, 3.0], vec![0.0, 0.0]);
        assert!(lowest_eigenpairs(&t, 0).is_err());
        assert!(lowest_eigenpairs(&t, 4).is_err());
    }

    #[test]
    fn harmonic_ladder() {
        let grid = GridSpec::new(-10.0, 10.0, 2000).unwrap();
        let t = harmonic(&grid);
        let pairs = lowest_eigenpairs(&t, 4).unwrap();
        for (i, p) in pairs.iter().enumerate() {
            assert!((p.value - (i as f64 + 0.5)).abs() <= 1e-4, "{} {}", i, p.value);
            assert!(residual(&t, p) <= 1e-8);
            assert_relative_eq!(grid.norm(&p.vector), 1.0, epsilon = 1e-12);
        }
        for i in 0..4 {
            for j in 0..i {
                assert!(dot(grid.h(), &pairs[i].vector, &pairs[j].vector).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn box_ground_state() {
        let grid = GridSpec::new(0.0, 1.0, 999).unwrap();
        let t = hamiltonian_constant(&ScalarField::constant(0.0), &grid).unwrap();
        let e = lowest_eigenvalues(&t, 1)[0];
        assert!((e - std::f64::consts::PI.powi(2) / 2.0).abs() <= 1e-3);
        let shifted = hamiltonian_constant(&ScalarField::constant(5.0), &grid).unwrap();
        let a = lowest_eigenvalues(&t, 3);
        let b = lowest_eigenvalues(&shifted, 3);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(y - x, 5.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_cluster_is_orthogonalized() {
        // Two decoupled identical blocks give exactly doubled eigenvalues.
        let mut diag = vec![2.0; 10];
        diag.extend(vec![2.0; 10]);
        let mut off = vec![-1.0; 9];
        off.push(0.0);
        off.extend(vec![-1.0; 9]);
        let t = op(diag, off);
        let pairs = lowest_eigenpairs(&t, 4).unwrap();
        assert_relative_eq!(pairs[0].value, pairs[1].value, epsilon = 1e-12);
        let h = t.grid.h();
        assert!(dot(h, &pairs[0].vector, &pairs[1].vector).abs() < 1e-10);
        for p in &pairs {
            assert!(residual(&t, p) <= 1e-10);
        }
    }

    #[test]
    fn identical_operators_compare_equal() {
        let grid = GridSpec::new(-8.0, 8.0, 300).unwrap();
        let t = harmonic(&grid);
        let r = spectrum_compare(&t, &t, 4);
        assert!(r.per_level_abs_diff.iter().all(|d| *d == 0.0));
        assert_eq!(r.k, 4);
    }

    #[test]
    fn squeezed_harmonic_pair() {
        // Both sides have frequency 1/sqrt(2).
        let grid = GridSpec::new(-10.0, 10.0, 2000).unwrap();
        let a = hamiltonian_bdd(
            &ScalarField::constant(2.0),
            &ScalarField::analytic("x^2/2", crate::fields::Domain::REAL_LINE, |x| Ok(x.powi(2).scale(0.5))),
            &grid,
        )
        .unwrap();
        let b = hamiltonian_constant(
            &ScalarField::analytic("x^2/4", crate::fields::Domain::REAL_LINE, |x| Ok(x.powi(2).scale(0.25))),
            &grid,
        )
        .unwrap();
        let r = spectrum_compare(&a, &b, 4);
        for (i, e) in r.eigs_a.iter().enumerate() {
            assert!((e - (i as f64 + 0.5) / 2f64.sqrt()).abs() <= 1e-4);
        }
        assert!(r.max_rel_diff() <= 1e-4);
    }

    #[test]
    fn refinement_shrinks_error_fourfold() {
        let e = |n: usize| lowest_eigenvalues(&harmonic(&GridSpec::new(-10.0, 10.0, n).unwrap()), 3);
        let (a, b, c) = (e(250), e(501), e(1003));
        for i in 0..3 {
            let ratio = (a[i] - b[i]).abs() / (b[i] - c[i]).abs();
            assert!((3.5..=4.5).contains(&ratio), "level {i}: ratio {ratio}");
        }
    }

    proptest! {
        #[test]
        fn matches_dense_oracle(diag in prop::collection::vec(-5.0f64..5.0, 8), off in prop::collection::vec(-3.0f64..3.0, 7)) {
            let t = op(diag.clone(), off.clone());
            let dense = DMatrix::from_fn(8, 8, |i, j| {
                if i == j { diag[i] } else if i + 1 == j { off[i] } else if j + 1 == i { off[j] } else { 0.0 }
            });
            let mut oracle: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
            oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ours = lowest_eigenvalues(&t, 8);
            for (a, b) in ours.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn sturm_count_is_monotone(diag in prop::collection::vec(-5.0f64..5.0, 12), off in prop::collection::vec(-3.0f64..3.0, 11), a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let t = op(diag, off);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(sturm_count(&t, lo) <= sturm_count(&t, hi));
        }

        #[test]
        fn pairs_have_small_residual(diag in prop::collection::vec(-5.0f64..5.0, 30), off in prop::collection::vec(-3.0f64..3.0, 29)) {
            let t = op(diag, off);
            for p in lowest_eigenpairs(&t, 5).unwrap() {
                prop_assert!(residual(&t, &p) <= 1e-8);
            }
        }
    }
}
