use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

/// All eigenpairs of `A x = λ B x` by Cholesky reduction and a symmetric
/// tridiagonal QR. Eigenvalues ascending, eigenvectors B-orthonormal.
pub fn dense_generalized(a: &CsrMatrix, b: &CsrMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n;
    let to_mat = |m: &CsrMatrix| {
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    };
    let am = to_mat(a);
    let bm = to_mat(b);
    let chol = bm.clone().cholesky().ok_or_else(|| {
        let row = (0..n).find(|&i| bm[(i, i)] <= 0.0).unwrap_or(0);
        Error::NotPositiveDefinite {
            row,
            pivot: bm[(row, row)],
        }
    })?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let y = l.solve_lower_triangular(&am).expect("Cholesky factor is nonsingular");
    let c = l.solve_lower_triangular(&y.transpose()).expect("Cholesky factor is nonsingular");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &i in &order {
        let x = lt
            .solve_upper_triangular(&eig.eigenvectors.column(i).into_owned())
            .expect("Cholesky factor is nonsingular");
        values.push(eig.eigenvalues[i]);
        vectors.push(x.iter().copied().collect());
    }
    Ok((values, vectors))
}
