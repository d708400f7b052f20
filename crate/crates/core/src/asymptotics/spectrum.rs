use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    /// −Δφ + φ = λφ with natural boundary conditions.
    Neumann,
    /// −Δu = λu with u = 0 on the boundary.
    Dirichlet,
}

/// Separation-of-variables mode: one wave number per axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub k: Vec<u32>,
    pub bc: Bc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCluster {
    pub lambda: f64,
    pub multiplicity: usize,
    /// 1-based position of the first eigenvalue of the cluster.
    pub first_index: usize,
    /// Modes sorted lexicographically descending.
    pub modes: Vec<ModeIndex>,
}

pub(crate) fn mode_eigenvalue(domain: &DomainSpec, mode: &ModeIndex) -> f64 {
    let s: f64 = domain
        .extents()
        .iter()
        .zip(&mode.k)
        .map(|((lo, hi), &k)| (f64::from(k) * PI / (hi - lo)).powi(2))
        .sum();
    match mode.bc {
        Bc::Neumann => 1.0 + s,
        Bc::Dirichlet => s,
    }
}

fn same_cluster(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

/// First `count` eigenvalue clusters of the rectangle or box, ascending.
pub fn analytic_spectrum(domain: &DomainSpec, bc: Bc, count: usize) -> Vec<SpectralCluster> {
    let ext = domain.extents();
    let dim = ext.len();
    let kmin = match bc {
        Bc::Neumann => 0u32,
        Bc::Dirichlet => 1,
    };
    // widen the search box until the first `count` clusters are stable
    let mut bound = 4u32;
    loop {
        let mut modes: Vec<(f64, ModeIndex)> = Vec::new();
        let mut k = vec![kmin; dim];
        'outer: loop {
            let mode = ModeIndex { k: k.clone(), bc };
            modes.push((mode_eigenvalue(domain, &mode), mode));
            for d in 0..dim {
                if k[d] < kmin + bound {
                    k[d] += 1;
                    continue 'outer;
                }
                k[d] = kmin;
            }
            break;
        }
        modes.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.k.cmp(&a.1.k)));
        // any mode with a wave number above `bound` has eigenvalue at least this
        let ceiling = ext
            .iter()
            .map(|(lo, hi)| (f64::from(kmin + bound + 1) * PI / (hi - lo)).powi(2))
            .fold(f64::INFINITY, f64::min)
            + if bc == Bc::Neumann { 1.0 } else { 0.0 };
        let mut clusters: Vec<SpectralCluster> = Vec::new();
        for (index, (lam, mode)) in (1..).zip(modes) {
            if lam >= ceiling {
                break;
            }
            match clusters.last_mut() {
                Some(c) if same_cluster(c.lambda, lam) => {
                    c.multiplicity += 1;
                    c.modes.push(mode);
                }
                _ => clusters.push(SpectralCluster {
                    lambda: lam,
                    multiplicity: 1,
                    first_index: index,
                    modes: vec![mode],
                }),
            }
        }
        // the last cluster may still be incomplete, so require one extra
        if clusters.len() > count {
            clusters.truncate(count);
            return clusters;
        }
        bound *= 2;
    }
}

/// The first `count` eigenvalues repeated according to multiplicity.
pub fn analytic_eigenvalues(domain: &DomainSpec, bc: Bc, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut n = count;
    loop {
        out.clear();
        for c in analytic_spectrum(domain, bc, n) {
            out.extend(std::iter::repeat_n(c.lambda, c.multiplicity));
        }
        if out.len() >= count {
            out.truncate(count);
            return out;
        }
        n *= 2;
    }
}

/// L²-orthonormal basis of one analytic eigenspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenspaceBasis {
    pub domain: DomainSpec,
    pub bc: Bc,
    pub lambda: f64,
    pub modes: Vec<ModeIndex>,
}

impl EigenspaceBasis {
    pub fn new(domain: DomainSpec, modes: Vec<ModeIndex>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::InvalidInput("an eigenspace needs at least one mode".into()))?;
        let bc = first.bc;
        let lambda = mode_eigenvalue(&domain, first);
        for m in &modes {
            if m.k.len() != domain.dim() || m.bc != bc {
                return Err(Error::InvalidInput(format!("mode {m:?} does not fit the domain")));
            }
            if bc == Bc::Dirichlet && m.k.contains(&0) {
                return Err(Error::InvalidInput(format!("Dirichlet mode {:?} has a zero index", m.k)));
            }
            if (mode_eigenvalue(&domain, m) - lambda).abs() > 1e-12 * lambda.abs().max(1.0) {
                return Err(Error::InvalidInput(format!("mode {:?} has a different eigenvalue", m.k)));
            }
        }
        Ok(EigenspaceBasis { domain, bc, lambda, modes })
    }

    /// The eigenspace whose cluster starts at 1-based index `n`.
    pub fn cluster_at(domain: &DomainSpec, bc: Bc, n: usize) -> Result<Self> {
        let clusters = analytic_spectrum(domain, bc, n + 1);
        let c = clusters
            .into_iter()
            .find(|c| c.first_index == n)
            .ok_or_else(|| Error::InvalidInput(format!("no eigenvalue cluster starts at index {n}")))?;
        EigenspaceBasis::new(*domain, c.modes)
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.domain.dim() || !self.domain.contains(x, 1e-12) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    fn normalization(&self, mode: &ModeIndex) -> f64 {
        let factor: f64 = match self.bc {
            Bc::Neumann => mode.k.iter().map(|&k| if k == 0 { 1.0 } else { 2.0 }).product(),
            Bc::Dirichlet => 2f64.powi(mode.k.len() as i32),
        };
        (factor / self.domain.measure()).sqrt()
    }

    /// Per-axis factor and its derivative.
    fn factors(&self, mode: &ModeIndex, x: &[f64]) -> Vec<(f64, f64)> {
        self.domain
            .extents()
            .iter()
            .zip(&mode.k)
            .zip(x)
            .map(|(((lo, hi), &k), &xi)| {
                let w = f64::from(k) * PI / (hi - lo);
                let t = w * (xi - lo);
                match self.bc {
                    Bc::Neumann => (t.cos(), -w * t.sin()),
                    Bc::Dirichlet => (t.sin(), w * t.cos()),
                }
            })
            .collect()
    }

    pub fn eval(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mode = &self.modes[i];
        Ok(self.normalization(mode) * self.factors(mode, x).iter().map(|f| f.0).product::<f64>())
    }

    pub fn grad(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mode = &self.modes[i];
        let c = self.normalization(mode);
        let f = self.factors(mode, x);
        Ok((0..f.len())
            .map(|d| {
                c * f
                    .iter()
                    .enumerate()
                    .map(|(e, fe)| if e == d { fe.1 } else { fe.0 })
                    .product::<f64>()
            })
            .collect())
    }

    /// Values and gradients of every basis function at `x`.
    pub fn sample(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let values = (0..self.dim()).map(|i| self.eval(i, x)).collect::<Result<_>>()?;
        let grads = (0..self.dim()).map(|i| self.grad(i, x)).collect::<Result<_>>()?;
        Ok((values, grads))
    }
}
