use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::{dot, norm2};
use crate::fem::CsrMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TorsionSolution {
    pub u: Vec<f64>,
    /// `Uᵀ(K+M)U`.
    pub h1_norm_sq: f64,
    /// `UᵀMU`.
    pub l2_norm_sq: f64,
    pub iterations: usize,
}

/// Jacobi-preconditioned conjugate gradients for `A x = b`, stopping at
/// relative residual `tol` or after `max_iter` steps.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NotPositiveDefinite { row: i, pivot: d })
            }
        })
        .collect::<Result<_>>()?;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { row: 0, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        final_residual: history.last().copied().unwrap_or(f64::NAN),
        residual_history: history,
    })
}

/// Solves `(K+M) U = b` to relative residual 1e-10 (at most 10n iterations).
pub fn solve_torsion(k: &CsrMatrix, m: &CsrMatrix, b: &[f64]) -> Result<TorsionSolution> {
    if b.len() != k.n || k.n != m.n {
        return Err(Error::InvalidInput("dimension mismatch in torsion solve".into()));
    }
    let a = k.linear_combination(1.0, m, 1.0);
    let (u, iterations) = pcg(&a, b, 1e-10, 10 * a.n.max(1))?;
    let h1_norm_sq = dot(&u, &a.mul_vec(&u));
    let l2_norm_sq = dot(&u, &m.mul_vec(&u));
    Ok(TorsionSolution {
        u,
        h1_norm_sq,
        l2_norm_sq,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, assemble_hole_flux_load};
    use crate::geometry::{build_matched_meshes, DomainSpec, HoleShape, HoleSpec};

    #[test]
    fn zero_load_gives_zero() {
        let k = CsrMatrix::identity(4);
        let s = solve_torsion(&k, &k, &[0.0; 4]).unwrap();
        assert!(s.u.iter().all(|&v| v == 0.0));
        assert_eq!((s.h1_norm_sq, s.l2_norm_sq), (0.0, 0.0));
    }

    #[test]
    fn energy_identity_on_hole_mesh() {
        let hole = HoleSpec::new(HoleShape::Disk, [2.1, 0.1], 0.5);
        let mesh = build_matched_meshes(&DomainSpec::reference_rectangle(), &hole, 0.2).unwrap().perforated;
        let (k, m) = assemble(&mesh).unwrap();
        let b = assemble_hole_flux_load(&mesh, |q, nu| q[0] * nu[0] - 0.3 * nu[1]).unwrap();
        let s = solve_torsion(&k, &m, &b).unwrap();
        let bu = dot(&b, &s.u);
        assert!((bu - s.h1_norm_sq).abs() <= 1e-9 * bu.abs());
        assert!(s.h1_norm_sq >= s.l2_norm_sq && s.l2_norm_sq > 0.0);
    }

    #[test]
    fn indefinite_diagonal_rejected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)], true).unwrap();
        assert!(matches!(pcg(&a, &[1.0, 1.0], 1e-10, 10), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn reports_history_on_stall() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t, true).unwrap();
        match pcg(&a, &vec![1.0; n], 1e-14, 3) {
            Err(Error::NoConvergence { residual_history, .. }) => assert_eq!(residual_history.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
