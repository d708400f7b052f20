//! Finite-dimensional check of the lemma on small eigenvalues: if the
//! spectrum of a form has a gap of width `γ` around a cluster of `m`
//! eigenvalues and an `m`-dimensional trial space `F` is almost invariant
//! (`δ < γ/√2`), then the eigenvalues of the form restricted to `F` are
//! within `4δ²/γ` of the cluster and `F` is within `√2δ/γ` of its
//! eigenspace.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A form written in its orthonormal eigenbasis, `Q = diag(ν)`, together
/// with a trial subspace spanned by the orthonormal columns of `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdvInstance {
    /// Eigenvalues, ascending.
    pub nu: Vec<f64>,
    /// `d × m`, stored by rows.
    pub f: Vec<Vec<f64>>,
    /// 1-based index of the first cluster eigenvalue.
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub h1: bool,
    pub h2: bool,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdvReport {
    /// Eigenvalues of `FᵀQF`, ascending.
    pub xi: Vec<f64>,
    /// `|ν_{n+i−1} − ξ_i|`.
    pub lhs: Vec<f64>,
    /// `4δ²/γ`.
    pub rhs: f64,
    pub eigenvalue_pass: bool,
    /// `‖v − Πv‖` for each column `v` of `F`.
    pub projection: Vec<f64>,
    /// Worst ratio `‖v − Πv‖/‖v‖` over all of `F`.
    pub projection_worst: f64,
    /// `√2δ/γ`.
    pub projection_rhs: f64,
    pub projection_pass: bool,
    pub delta: f64,
    pub pass: bool,
}

impl CdvInstance {
    pub fn new(nu: Vec<f64>, f: Vec<Vec<f64>>, n: usize, gamma: f64) -> Result<Self> {
        let d = nu.len();
        if f.len() != d || d == 0 {
            return Err(Error::InvalidInput("F must have one row per eigenvalue".into()));
        }
        let m = f[0].len();
        if m == 0 || f.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("F must be a non-empty rectangular matrix".into()));
        }
        if n == 0 || n + m - 1 > d {
            return Err(Error::InvalidInput(format!("cluster {n}..{} does not fit in dimension {d}", n + m - 1)));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput("γ must be positive".into()));
        }
        if nu.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("ν must be ascending".into()));
        }
        let inst = CdvInstance { nu, f, n, m, gamma };
        let fm = inst.f_matrix();
        let gram = fm.transpose() * &fm - DMatrix::identity(m, m);
        if gram.amax() > 1e-12 {
            return Err(Error::InvalidInput(format!("columns of F are not orthonormal (error {:e})", gram.amax())));
        }
        Ok(inst)
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    fn f_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.m, |i, j| self.f[i][j])
    }

    fn cluster(&self) -> std::ops::Range<usize> {
        self.n - 1..self.n - 1 + self.m
    }
}

fn largest_singular_value(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

/// (H1) on the spectrum and `δ = ‖QF‖₂` for (H2).
pub fn check_hypotheses(inst: &CdvInstance) -> Hypotheses {
    let g = inst.gamma;
    let c = inst.cluster();
    let h1 = inst.nu.iter().enumerate().all(|(i, &v)| {
        if i < c.start {
            v <= -g
        } else if c.contains(&i) {
            v.abs() <= g
        } else {
            v >= g
        }
    });
    let qf = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(inst.nu.clone())) * inst.f_matrix();
    let delta = largest_singular_value(&qf);
    Hypotheses {
        h1,
        h2: delta < g / 2f64.sqrt(),
        delta,
    }
}

pub fn verify_bound(inst: &CdvInstance) -> Result<CdvReport> {
    let h = check_hypotheses(inst);
    if !h.h1 {
        return Err(Error::Hypothesis {
            which: "H1",
            detail: format!("spectrum {:?} has no gap of width γ = {} around the cluster", inst.nu, inst.gamma),
        });
    }
    if !h.h2 {
        return Err(Error::Hypothesis {
            which: "H2",
            detail: format!("δ = {} is not below γ/√2 = {}", h.delta, inst.gamma / 2f64.sqrt()),
        });
    }
    let f = inst.f_matrix();
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(inst.nu.clone()));
    let restricted = f.transpose() * q * &f;
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let mut xi: Vec<f64> = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
    xi.sort_by(f64::total_cmp);
    let c = inst.cluster();
    let lhs: Vec<f64> = xi.iter().enumerate().map(|(i, x)| (inst.nu[c.start + i] - x).abs()).collect();
    let rhs = 4.0 * h.delta * h.delta / inst.gamma;
    let eigenvalue_pass = lhs.iter().all(|&l| l <= rhs + 1e-12);

    let mut off = f.clone();
    for i in c.clone() {
        off.row_mut(i).fill(0.0);
    }
    let projection: Vec<f64> = (0..inst.m).map(|j| off.column(j).norm()).collect();
    let projection_worst = largest_singular_value(&off);
    let projection_rhs = 2f64.sqrt() * h.delta / inst.gamma;
    let projection_pass = projection_worst <= projection_rhs + 1e-12;
    Ok(CdvReport {
        xi,
        lhs,
        rhs,
        eigenvalue_pass,
        projection,
        projection_worst,
        projection_rhs,
        projection_pass,
        delta: h.delta,
        pass: eigenvalue_pass && projection_pass,
    })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; one variate per call keeps the stream simple
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Draws one instance satisfying (H1) and (H2).
///
/// ν comes from the bands `[−10γ, −γ]`, `[−γ, γ]` and `[γ, 10γ]`; `F` is the
/// cluster eigenspace rotated towards the complement by a random mixing
/// angle. Draws that violate (H2) are rejected.
pub fn random_instance(rng: &mut ChaCha8Rng, dim_max: usize, m_max: usize) -> CdvInstance {
    let dim_max = dim_max.max(1);
    loop {
        let d = rng.gen_range(1..=dim_max);
        let m = rng.gen_range(1..=m_max.max(1).min(d));
        let below = rng.gen_range(0..=d - m);
        let gamma = rng.gen_range(0.5..2.0);
        let mut nu: Vec<f64> = Vec::with_capacity(d);
        let band = |rng: &mut ChaCha8Rng, lo: f64, hi: f64, k: usize| {
            let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..=hi)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        nu.extend(band(rng, -10.0 * gamma, -gamma, below));
        nu.extend(band(rng, -gamma, gamma, m));
        nu.extend(band(rng, gamma, 10.0 * gamma, d - m - below));

        // random orthonormal frame inside the cluster eigenspace
        let a = DMatrix::from_fn(m, m, |_, _| gaussian(rng));
        let frame = a.qr().q();
        let theta = rng.gen_range(0.0..std::f64::consts::FRAC_PI_4);
        let mut f0 = DMatrix::zeros(d, m);
        for j in 0..m {
            for k in 0..m {
                f0[(below + k, j)] = frame[(k, j)];
            }
        }
        if d > m {
            let mut g = DMatrix::from_fn(d, m, |_, _| gaussian(rng));
            for k in 0..m {
                g.row_mut(below + k).fill(0.0);
            }
            let norm = g.norm();
            if norm > 0.0 {
                f0 += g * (theta.tan() / norm * (m as f64).sqrt());
            }
        }
        let q = f0.qr().q();
        let f: Vec<Vec<f64>> = (0..d).map(|i| (0..m).map(|j| q[(i, j)]).collect()).collect();
        let Ok(inst) = CdvInstance::new(nu, f, below + 1, gamma) else {
            continue;
        };
        let h = check_hypotheses(&inst);
        if h.h1 && h.h2 {
            return inst;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub seed: u64,
    pub count: usize,
    pub dim_max: usize,
    pub passed: usize,
    pub failed: usize,
    /// Indices of failing instances.
    pub failures: Vec<usize>,
    /// Largest `max_i lhs_i / rhs` seen; at most one when the bound holds.
    pub worst_eigenvalue_ratio: f64,
    pub worst_projection_ratio: f64,
    pub delta_min: f64,
    pub delta_over_gamma_max: f64,
}

/// Runs `count` instances in parallel. Instance `k` draws from its own
/// stream of the seeded generator, so the report does not depend on the
/// thread count.
pub fn fuzz(seed: u64, count: usize, dim_max: usize) -> FuzzReport {
    let results: Vec<(CdvReport, f64)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let inst = random_instance(&mut rng, dim_max, 3);
            let report = verify_bound(&inst).expect("generated instances satisfy the hypotheses");
            (report, inst.gamma)
        })
        .collect();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else if num > 1e-12 { f64::INFINITY } else { 0.0 };
    let mut out = FuzzReport {
        seed,
        count,
        dim_max,
        passed: 0,
        failed: 0,
        failures: Vec::new(),
        worst_eigenvalue_ratio: 0.0,
        worst_projection_ratio: 0.0,
        delta_min: f64::INFINITY,
        delta_over_gamma_max: 0.0,
    };
    for (k, (r, gamma)) in results.iter().enumerate() {
        if r.pass {
            out.passed += 1;
        } else {
            out.failed += 1;
            out.failures.push(k);
        }
        let lmax = r.lhs.iter().copied().fold(0.0, f64::max);
        out.worst_eigenvalue_ratio = out.worst_eigenvalue_ratio.max(ratio(lmax, r.rhs));
        out.worst_projection_ratio = out.worst_projection_ratio.max(ratio(r.projection_worst, r.projection_rhs));
        out.delta_min = out.delta_min.min(r.delta);
        out.delta_over_gamma_max = out.delta_over_gamma_max.max(r.delta / gamma);
    }
    if count == 0 {
        out.delta_min = 0.0;
    }
    out
}
