//! Lowest eigenpairs of symmetric pencils `A x = λ B x`, certified by
//! residuals and Sylvester inertia counts.

mod branches;
mod dense;
mod krylov;
mod ldlt;
mod ordering;

pub use branches::{track_branches, BranchAssignment};
pub use dense::dense_generalized;
pub use ldlt::{Ldlt, LdltSymbolic};
pub use ordering::nested_dissection;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{dot, CsrMatrix};
use krylov::relative_residual;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_restarts: usize,
    /// Problems up to this size use the dense path.
    pub dense_threshold: usize,
    pub block_size: usize,
    pub inertia_checks: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-9,
            seed: 0x05ee_d1ab,
            max_restarts: 100,
            dense_threshold: 2000,
            block_size: 4,
            inertia_checks: 3,
        }
    }
}

/// One Sylvester spot check: eigenvalues below `shift` versus negative
/// pivots of `A − shift·B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaCheck {
    pub shift: f64,
    pub expected: usize,
    pub counted: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖Ax − λBx‖₂ / (λ‖Bx‖₂)`.
    pub residuals: Vec<f64>,
    pub tol: f64,
    pub seed: u64,
    pub method: String,
    pub iterations: usize,
    pub inertia: Vec<InertiaCheck>,
    pub certified: bool,
}

impl EigenResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &r| m.max(r))
    }
}

pub fn lowest_eigenpairs(a: &CsrMatrix, b: &CsrMatrix, k: usize, tol: f64) -> Result<EigenResult> {
    lowest_eigenpairs_with(
        a,
        b,
        k,
        &EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

pub fn lowest_eigenpairs_with(a: &CsrMatrix, b: &CsrMatrix, k: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let n = a.n;
    if b.n != n {
        return Err(Error::InvalidInput("pencil dimensions differ".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} must lie in 1..={n}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let (values, vectors, method, iterations, converged, sym) = if n <= opts.dense_threshold {
        let (v, x) = dense_generalized(a, b)?;
        let keep = (k + 2).min(n);
        let sym = LdltSymbolic::analyse(&a.linear_combination(1.0, b, 1.0));
        (v[..keep].to_vec(), x[..keep].to_vec(), "dense", 0, true, sym)
    } else {
        let out = krylov::block_krylov(a, b, k, opts)?;
        (out.values, out.vectors, "shift_invert_block_krylov", out.iterations, out.converged, out.symbolic)
    };
    let residuals: Vec<f64> = (0..k).map(|j| relative_residual(a, b, values[j], &vectors[j])).collect();
    let inertia = inertia_checks(a, b, &sym, &values, k, opts.inertia_checks)?;
    let certified = converged && residuals.iter().all(|&r| r <= opts.tol) && inertia.iter().all(|c| c.expected == c.counted);
    Ok(EigenResult {
        eigenvalues: values[..k].to_vec(),
        eigenvectors: vectors[..k].to_vec(),
        residuals,
        tol: opts.tol,
        seed: opts.seed,
        method: method.to_string(),
        iterations,
        inertia,
        certified,
    })
}

/// Shifts placed in the widest relative gaps among the computed values
/// (including the gap above the k-th one when available).
fn inertia_checks(
    a: &CsrMatrix,
    b: &CsrMatrix,
    sym: &LdltSymbolic,
    values: &[f64],
    k: usize,
    count: usize,
) -> Result<Vec<InertiaCheck>> {
    let mut gaps: Vec<(f64, usize, f64)> = Vec::new();
    // below the smallest eigenvalue
    let scale = values[0].abs().max(1e-300);
    gaps.push((0.5, 0, values[0] - 0.5 * scale));
    for j in 1..=k.min(values.len() - 1) {
        let (lo, hi) = (values[j - 1], values[j]);
        gaps.push(((hi - lo) / hi.abs().max(1e-300), j, 0.5 * (lo + hi)));
    }
    gaps.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut out = Vec::new();
    for &(_, expected, shift) in gaps.iter().take(count) {
        let shifted = a.linear_combination(1.0, b, -shift);
        let counted = sym.factor(&shifted)?.negative_pivots();
        out.push(InertiaCheck {
            shift,
            expected,
            counted,
        });
    }
    out.sort_by(|x, y| x.shift.total_cmp(&y.shift));
    Ok(out)
}

/// Largest `|x_iᵀ B x_j − δ_ij|`.
pub fn b_orthonormality_error(b: &CsrMatrix, vectors: &[Vec<f64>]) -> f64 {
    let bx: Vec<Vec<f64>> = vectors.iter().map(|x| b.mul_vec(x)).collect();
    let mut worst: f64 = 0.0;
    for (i, xi) in vectors.iter().enumerate() {
        for (j, bxj) in bx.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(xi, bxj) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_pencil() {
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)], true).unwrap();
        let r = lowest_eigenpairs(&a, &CsrMatrix::identity(3), 2, 1e-12).unwrap();
        assert_eq!(r.eigenvalues.len(), 2);
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-14 && (r.eigenvalues[1] - 2.0).abs() < 1e-14);
        assert!(r.certified);
    }

    fn tridiagonal_pencil(n: usize) -> (CsrMatrix, CsrMatrix) {
        let mut ta = Vec::new();
        let mut tb = Vec::new();
        for i in 0..n {
            ta.push((i, i, 2.0));
            tb.push((i, i, 4.0 / 6.0));
            if i + 1 < n {
                ta.push((i, i + 1, -1.0));
                ta.push((i + 1, i, -1.0));
                tb.push((i, i + 1, 1.0 / 6.0));
                tb.push((i + 1, i, 1.0 / 6.0));
            }
        }
        (CsrMatrix::from_triplets(n, &ta, true).unwrap(), CsrMatrix::from_triplets(n, &tb, true).unwrap())
    }

    #[test]
    fn sparse_path_matches_dense_path() {
        let (a, b) = tridiagonal_pencil(400);
        let dense = lowest_eigenpairs(&a, &b, 6, 1e-10).unwrap();
        let sparse = lowest_eigenpairs_with(
            &a,
            &b,
            6,
            &EigenOptions {
                tol: 1e-10,
                dense_threshold: 0,
                ..EigenOptions::default()
            },
        )
        .unwrap();
        assert_eq!(sparse.method, "shift_invert_block_krylov");
        assert!(sparse.certified && dense.certified);
        for (x, y) in dense.eigenvalues.iter().zip(&sparse.eigenvalues) {
            assert!((x - y).abs() <= 1e-10 * x.abs(), "{x} vs {y}");
        }
        assert!(b_orthonormality_error(&b, &sparse.eigenvectors) < 1e-8);
        // closed form for the 1D P1 pencil: λ_j = 6(1−cos θ)/(2+cos θ), θ = jπ/(n+1)
        for (j, lam) in sparse.eigenvalues.iter().enumerate() {
            let th = (j + 1) as f64 * std::f64::consts::PI / 401.0;
            let exact = 6.0 * (1.0 - th.cos()) / (2.0 + th.cos());
            assert!((lam - exact).abs() <= 1e-10 * exact);
        }
    }

    #[test]
    fn mass_not_positive_definite_rejected() {
        let a = CsrMatrix::identity(3);
        let b = CsrMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, -1.0), (2, 2, 1.0)], true).unwrap();
        assert!(matches!(lowest_eigenpairs(&a, &b, 1, 1e-9), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn random_small_pencils_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.gen_range(2..=12);
            let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
            let h: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
            let mut ta = Vec::new();
            let mut tb = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let a: f64 = (0..n).map(|l| g[i][l] * g[j][l]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
                    let b: f64 = (0..n).map(|l| h[i][l] * h[j][l]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
                    ta.push((i, j, a));
                    tb.push((i, j, b));
                }
            }
            let a = CsrMatrix::from_triplets(n, &ta, true).unwrap();
            let b = CsrMatrix::from_triplets(n, &tb, true).unwrap();
            let k = rng.gen_range(1..=n);
            let r = lowest_eigenpairs(&a, &b, k, 1e-9).unwrap();
            // brute force: roots of det(A − λB) bracketed via inertia bisection
            for (j, lam) in r.eigenvalues.iter().enumerate() {
                let (mut lo, mut hi) = (0.0, 1e3);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let neg = Ldlt::factor(&a.linear_combination(1.0, &b, -mid)).map(|f| f.negative_pivots());
                    match neg {
                        Ok(c) if c > j => hi = mid,
                        _ => lo = mid,
                    }
                }
                assert!((lam - lo).abs() <= 1e-10 * lam.abs(), "{lam} vs {lo}");
            }
        }
    }
}
