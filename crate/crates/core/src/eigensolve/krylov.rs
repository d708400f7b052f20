//! Shift-invert block Krylov iteration with thick restarts and full
//! B-orthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ldlt::{Ldlt, LdltSymbolic};
use super::EigenOptions;
use crate::error::{Error, Result};
use crate::fem::{dot, norm2, CsrMatrix};

pub(crate) struct KrylovOutcome {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub symbolic: LdltSymbolic,
}

struct Basis {
    v: Vec<Vec<f64>>,
    av: Vec<Vec<f64>>,
    bv: Vec<Vec<f64>>,
    // projected A, kept incrementally
    h: Vec<Vec<f64>>,
}

impl Basis {
    /// B-orthogonalizes `w` against the basis (two passes) and appends it.
    /// Returns false if `w` is numerically dependent.
    fn push(&mut self, mut w: Vec<f64>, a: &CsrMatrix, b: &CsrMatrix) -> bool {
        let mut bw = b.mul_vec(&w);
        let before = dot(&w, &bw).max(0.0).sqrt();
        if before == 0.0 || !before.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for (vi, bvi) in self.v.iter().zip(&self.bv) {
                let c = dot(bvi, &w);
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= c * vj;
                }
            }
        }
        bw = b.mul_vec(&w);
        let after = dot(&w, &bw).max(0.0).sqrt();
        if after <= 1e-13 * before {
            return false;
        }
        for x in w.iter_mut() {
            *x /= after;
        }
        for x in bw.iter_mut() {
            *x /= after;
        }
        let aw = a.mul_vec(&w);
        let row: Vec<f64> = self.v.iter().map(|vi| dot(vi, &aw)).collect();
        for (hi, &r) in self.h.iter_mut().zip(&row) {
            hi.push(r);
        }
        let mut last = row;
        last.push(dot(&w, &aw));
        self.h.push(last);
        self.v.push(w);
        self.av.push(aw);
        self.bv.push(bw);
        true
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    fn combine(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cols[0].len()];
        for (c, &yi) in cols.iter().zip(y) {
            if yi != 0.0 {
                for (o, ci) in out.iter_mut().zip(c) {
                    *o += yi * ci;
                }
            }
        }
        out
    }
}

/// Ritz values (ascending) and coefficient vectors of the projected pencil.
fn rayleigh_ritz(h: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = h.len();
    let mut hm = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            hm[(i, j)] = 0.5 * (h[i][j] + h[j][i]);
        }
    }
    let eig = SymmetricEigen::new(hm);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

pub(crate) fn relative_residual(a: &CsrMatrix, b: &CsrMatrix, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let bx = b.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(&bx).map(|(p, q)| p - lambda * q).collect();
    norm2(&r) / (lambda.abs() * norm2(&bx))
}

/// Factor of `A − σB` for the shift-invert operator; σ = 0 unless A is
/// singular or indefinite, in which case a small negative shift is used.
fn operator_factor(sym: &LdltSymbolic, a: &CsrMatrix, b: &CsrMatrix) -> Result<(f64, Ldlt)> {
    if let Ok(f) = sym.factor(a) {
        if f.negative_pivots() == 0 {
            return Ok((0.0, f));
        }
    }
    let ratio = a.diagonal().iter().sum::<f64>() / b.diagonal().iter().sum::<f64>();
    let mut sigma = -1e-3 * ratio.abs().max(1e-12);
    for _ in 0..6 {
        let shifted = a.linear_combination(1.0, b, -sigma);
        if let Ok(f) = sym.factor(&shifted) {
            return Ok((sigma, f));
        }
        sigma *= 10.0;
    }
    Err(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })
}

pub(crate) fn block_krylov(a: &CsrMatrix, b: &CsrMatrix, k: usize, opts: &EigenOptions) -> Result<KrylovOutcome> {
    let n = a.n;
    let nev = (k + 2).min(n);
    let p = opts.block_size.max(1);
    let m_max = (3 * nev + 4 * p).max(40).min(n);
    let keep = (nev + p).min(m_max.saturating_sub(p)).max(nev.min(m_max));

    let pattern = a.linear_combination(1.0, b, 1.0);
    let sym = LdltSymbolic::analyse(&pattern);
    let bf = sym.factor(b)?;
    if let Some(row) = bf.d.iter().position(|&d| d <= 0.0) {
        return Err(Error::NotPositiveDefinite { row, pivot: bf.d[row] });
    }
    let (_sigma, op) = operator_factor(&sym, a, b)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen::<f64>() - 0.5).collect() };
    let mut basis = Basis {
        v: Vec::new(),
        av: Vec::new(),
        bv: Vec::new(),
        h: Vec::new(),
    };
    let mut front: Vec<Vec<f64>> = (0..p).map(|_| random_vec(&mut rng)).collect();
    let mut iterations = 0;
    let mut best: Option<(Vec<f64>, Vec<Vec<f64>>)> = None;
    for _cycle in 0..opts.max_restarts {
        while basis.len() + p <= m_max {
            let mut added = Vec::new();
            for x in &front {
                let bx = b.mul_vec(x);
                let mut w = op.solve(&bx);
                iterations += 1;
                let mut tries = 0;
                let start = basis.len();
                while !basis.push(w, a, b) {
                    tries += 1;
                    if tries > 3 {
                        break;
                    }
                    w = op.solve(&b.mul_vec(&random_vec(&mut rng)));
                }
                if basis.len() > start {
                    added.push(basis.v[basis.len() - 1].clone());
                }
            }
            if added.is_empty() {
                break;
            }
            front = added;
        }
        if basis.len() < nev {
            return Err(Error::InvalidInput("Krylov basis collapsed".into()));
        }
        let (theta, y) = rayleigh_ritz(&basis.h);
        // residual check in index order, stopping at the first failure
        let mut all = true;
        let mut first_bad = nev;
        let mut ritz: Vec<Vec<f64>> = Vec::with_capacity(nev);
        for j in 0..nev {
            let x = Basis::combine(&basis.v, &y[j]);
            if all && j < k {
                let ax = Basis::combine(&basis.av, &y[j]);
                let bx = Basis::combine(&basis.bv, &y[j]);
                let r: Vec<f64> = ax.iter().zip(&bx).map(|(p, q)| p - theta[j] * q).collect();
                let res = norm2(&r) / (theta[j].abs() * norm2(&bx));
                if !(res <= opts.tol) {
                    all = false;
                    first_bad = j;
                }
            }
            ritz.push(x);
        }
        if all {
            return Ok(KrylovOutcome {
                values: theta[..nev].to_vec(),
                vectors: ritz,
                iterations,
                converged: true,
                symbolic: sym,
            });
        }
        best = Some((theta[..nev].to_vec(), ritz));

        // thick restart on the lowest Ritz vectors
        let kept = keep.min(basis.len());
        let mut next = Basis {
            v: Vec::with_capacity(m_max),
            av: Vec::with_capacity(m_max),
            bv: Vec::with_capacity(m_max),
            h: Vec::with_capacity(m_max),
        };
        // products and projections are recomputed so rounding does not
        // accumulate across restarts
        for yj in y.iter().take(kept) {
            next.push(Basis::combine(&basis.v, yj), a, b);
        }
        front = (first_bad..next.len()).take(p).map(|j| next.v[j].clone()).collect();
        if front.is_empty() {
            front = (0..p).map(|_| random_vec(&mut rng)).collect();
        }
        basis = next;
    }
    let (values, vectors) = best.expect("at least one cycle ran");
    Ok(KrylovOutcome {
        values,
        vectors,
        iterations,
        converged: false,
        symbolic: sym,
    })
}
