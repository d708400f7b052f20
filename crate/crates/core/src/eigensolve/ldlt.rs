//! Up-looking sparse LDLᵀ factorization without pivoting.

use super::ordering::nested_dissection;
use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

const NONE: usize = usize::MAX;

/// Ordering and elimination tree, reusable for every matrix whose pattern
/// is contained in the analysed one.
#[derive(Debug, Clone)]
pub struct LdltSymbolic {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Ldlt {
    sym: LdltSymbolic,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    pub d: Vec<f64>,
}

impl LdltSymbolic {
    pub fn analyse(pattern: &CsrMatrix) -> Self {
        let n = pattern.n;
        let perm = nested_dissection(pattern);
        let mut pinv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut count = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &j in pattern.row(perm[k]).0 {
                let mut i = pinv[j];
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    count[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = vec![0; n + 1];
        for i in 0..n {
            col_ptr[i + 1] = col_ptr[i] + count[i];
        }
        LdltSymbolic {
            n,
            perm,
            pinv,
            parent,
            col_ptr,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_ptr[self.n]
    }

    /// Numeric factorization. Fails only on an exactly zero (or non-finite) pivot.
    pub fn factor(&self, a: &CsrMatrix) -> Result<Ldlt> {
        let n = self.n;
        assert_eq!(a.n, n, "dimension mismatch");
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut len = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut pattern = vec![0usize; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = a.row(self.perm[k]);
            for (&j, &v) in cols.iter().zip(vals) {
                let mut i = self.pinv[j];
                if i > k {
                    continue;
                }
                y[i] += v;
                let mut depth = 0;
                while flag[i] != k {
                    stack[depth] = i;
                    depth += 1;
                    flag[i] = k;
                    i = self.parent[i];
                }
                while depth > 0 {
                    depth -= 1;
                    top -= 1;
                    pattern[top] = stack[depth];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = self.col_ptr[i];
                for q in start..start + len[i] {
                    y[row_idx[q]] -= values[q] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                let q = start + len[i];
                row_idx[q] = k;
                values[q] = lki;
                len[i] += 1;
            }
            if dk == 0.0 || !dk.is_finite() {
                return Err(Error::NotPositiveDefinite { row: self.perm[k], pivot: dk });
            }
            d[k] = dk;
        }
        Ok(Ldlt {
            sym: self.clone(),
            row_idx,
            values,
            d,
        })
    }
}

impl Ldlt {
    pub fn factor(a: &CsrMatrix) -> Result<Ldlt> {
        LdltSymbolic::analyse(a).factor(a)
    }

    /// Number of negative pivots, i.e. of negative eigenvalues of the matrix.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &self.sym;
        let mut x: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        for j in 0..s.n {
            let xj = x[j];
            if xj != 0.0 {
                for q in s.col_ptr[j]..s.col_ptr[j + 1] {
                    x[self.row_idx[q]] -= self.values[q] * xj;
                }
            }
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for j in (0..s.n).rev() {
            let mut acc = x[j];
            for q in s.col_ptr[j]..s.col_ptr[j + 1] {
                acc -= self.values[q] * x[self.row_idx[q]];
            }
            x[j] = acc;
        }
        let mut out = vec![0.0; s.n];
        for (new, &old) in s.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, norm2};
    use crate::geometry::{build_rectangle_mesh, DomainSpec};

    #[test]
    fn solves_mesh_system() {
        let mesh = build_rectangle_mesh(&DomainSpec::reference_rectangle(), 0.25).unwrap();
        let (k, m) = assemble(&mesh).unwrap();
        let a = k.linear_combination(1.0, &m, 1.0);
        let f = Ldlt::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..a.n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = f.solve(&b);
        let err: Vec<f64> = x.iter().zip(&x_true).map(|(u, v)| u - v).collect();
        assert!(norm2(&err) < 1e-10 * norm2(&x_true));
        assert_eq!(f.negative_pivots(), 0);
    }

    #[test]
    fn inertia_of_diagonal_shift() {
        let a = CsrMatrix::from_triplets(
            4,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (3, 3, 4.0), (0, 1, 0.1), (1, 0, 0.1)],
            true,
        )
        .unwrap();
        let shifted = a.linear_combination(1.0, &CsrMatrix::identity(4), -2.5);
        assert_eq!(Ldlt::factor(&shifted).unwrap().negative_pivots(), 2);
    }

    #[test]
    fn zero_pivot_reported() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 0.0), (1, 1, 1.0)], true).unwrap();
        assert!(matches!(Ldlt::factor(&a), Err(Error::NotPositiveDefinite { .. })));
    }
}
