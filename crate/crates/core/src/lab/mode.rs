use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::fit_line_weighted;
use super::sweep::{solve_mesh, SCHEMA_VERSION};
use crate::asymptotics::{ball_torsion_energy, Bc, EigenspaceBasis, ModeIndex};
use crate::eigensolve::EigenOptions;
use crate::error::{Error, Result};
use crate::fem::{assemble, assemble_hole_flux_load, dot, solve_torsion, CsrMatrix};
use crate::geometry::{build_matched_meshes_with, BoundaryTag, DomainSpec, HoleShape, HoleSpec, MesherOptions, Point};

/// Experiments driven by a single analytic Neumann mode and a disk hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeExperimentConfig {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub x0: Point,
    /// Positive and strictly descending.
    pub eps: Vec<f64>,
    pub h_target: f64,
    /// Wave numbers of the Neumann mode φ.
    pub mode: Vec<u32>,
    /// 1-based first index of the cluster containing φ.
    pub cluster_n: usize,
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
}

impl ModeExperimentConfig {
    /// The (2,0) mode of the rectangle with the hole centred at (2.1, 0.1).
    pub fn validation() -> Self {
        ModeExperimentConfig {
            schema_version: SCHEMA_VERSION,
            domain: DomainSpec::reference_rectangle(),
            x0: [2.1, 0.1],
            eps: vec![0.5, 0.4, 0.3, 0.2, 0.1],
            h_target: 0.05,
            mode: vec![2, 0],
            cluster_n: 3,
            k: 6,
            tol: 1e-9,
            seed: 0x05ee_d1ab,
        }
    }

    fn basis(&self) -> Result<EigenspaceBasis> {
        EigenspaceBasis::new(
            self.domain,
            vec![ModeIndex {
                k: self.mode.clone(),
                bc: Bc::Neumann,
            }],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.domain.dim() != 2 {
            return Err(Error::InvalidInput("domain: the experiment is two-dimensional".into()));
        }
        if self.eps.is_empty()
            || self.eps.iter().any(|&e| !(e > 0.0))
            || self.eps.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(Error::InvalidInput("eps: values must be positive and strictly descending".into()));
        }
        if !(self.h_target > 0.0 && self.tol > 0.0) {
            return Err(Error::InvalidInput("h_target and tol must be positive".into()));
        }
        self.basis().map_err(|e| Error::InvalidInput(format!("mode: {e}")))?;
        for &eps in &self.eps {
            HoleSpec::new(HoleShape::Disk, self.x0, eps).validate_in(&self.domain)?;
        }
        Ok(())
    }

    /// Exterior torsion energy of the unit disk with flux `∇φ(x0)·ν`, the
    /// limit of both scaled quantities.
    pub fn limit(&self) -> Result<f64> {
        let g = self.basis()?.grad(0, &self.x0)?;
        Ok(ball_torsion_energy(&g, self.domain.dim()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsionRow {
    pub eps: f64,
    pub h1_norm_sq: f64,
    pub l2_norm_sq: f64,
    /// `ε^{−N} ‖U‖²_{H¹}`.
    pub scaled_energy: f64,
    /// `‖U‖²_{L²} / ‖U‖²_{H¹}`.
    pub l2_h1_ratio: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsionDecay {
    pub config: ModeExperimentConfig,
    /// Exterior torsion energy of the unit disk with flux `∇φ(x0)·ν`.
    pub limit: f64,
    pub rows: Vec<TorsionRow>,
    /// Intercept of `scaled_energy = L + c ε` (weights `1/ε`); needs two rows.
    pub extrapolated_limit: Option<f64>,
    /// Of the scaled energy at the smallest ε against `limit`.
    pub relative_error_smallest_eps: f64,
}

/// Solves the boundary torsion problem with flux `∂_ν φ` on the hole for each ε.
pub fn torsion_decay_experiment(config: &ModeExperimentConfig) -> Result<TorsionDecay> {
    config.validate()?;
    let basis = config.basis()?;
    let n_dim = config.domain.dim();
    let rows = config
        .eps
        .par_iter()
        .map(|&eps| -> Result<TorsionRow> {
            let hole = HoleSpec::new(HoleShape::Disk, config.x0, eps);
            let pair = build_matched_meshes_with(&config.domain, &hole, &MesherOptions::new(config.h_target))?;
            let mesh = &pair.perforated;
            let (k, m) = assemble(mesh)?;
            let failure = RefCell::new(None);
            let load = assemble_hole_flux_load(mesh, |q, nu| match basis.grad(0, &q) {
                Ok(g) => g[0] * nu[0] + g[1] * nu[1],
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            })?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            let sol = solve_torsion(&k, &m, &load)?;
            Ok(TorsionRow {
                eps,
                h1_norm_sq: sol.h1_norm_sq,
                l2_norm_sq: sol.l2_norm_sq,
                scaled_energy: sol.h1_norm_sq / eps.powi(n_dim as i32),
                l2_h1_ratio: if sol.h1_norm_sq > 0.0 { sol.l2_norm_sq / sol.h1_norm_sq } else { 0.0 },
                iterations: sol.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = config.limit()?;
    let extrapolated_limit = (rows.len() >= 2)
        .then(|| {
            let x: Vec<f64> = rows.iter().map(|r| r.eps).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.scaled_energy).collect();
            let w: Vec<f64> = x.iter().map(|e| 1.0 / e).collect();
            fit_line_weighted(&x, &y, &w).ok().map(|f| f.intercept)
        })
        .flatten();
    let last = rows.last().expect("eps list is non-empty");
    let relative_error_smallest_eps = if limit > 0.0 { (last.scaled_energy - limit).abs() / limit } else { last.scaled_energy.abs() };
    Ok(TorsionDecay {
        config: config.clone(),
        limit,
        rows,
        extrapolated_limit,
        relative_error_smallest_eps,
    })
}

/// `‖φ − Πφ/‖Πφ‖‖²` in the `A`-norm, where `Π` is the `M`-orthogonal
/// projector onto the span of the `M`-orthonormal `vectors`.
pub fn projection_distance(a: &CsrMatrix, m: &CsrMatrix, vectors: &[Vec<f64>], phi: &[f64]) -> f64 {
    let mphi = m.mul_vec(phi);
    let mut proj = vec![0.0; phi.len()];
    for v in vectors {
        let c = dot(v, &mphi);
        proj.iter_mut().zip(v).for_each(|(p, vi)| *p += c * vi);
    }
    let norm = dot(&proj, &m.mul_vec(&proj)).sqrt();
    let diff: Vec<f64> = phi.iter().zip(&proj).map(|(f, p)| f - p / norm).collect();
    dot(&diff, &a.mul_vec(&diff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub eps: f64,
    pub distance_sq: f64,
    /// `ε^{−N}` times the distance.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionStudy {
    pub config: ModeExperimentConfig,
    pub limit: f64,
    pub rows: Vec<ProjectionRow>,
    /// Slope of `log distance²` against `log ε`.
    pub loglog_slope: Option<f64>,
    pub extrapolated_limit: Option<f64>,
    pub notes: Vec<String>,
}

/// Distance in `H¹` between the nodal interpolant of φ and its normalised
/// projection onto the perturbed cluster eigenspace.
pub fn projection_experiment(config: &ModeExperimentConfig) -> Result<ProjectionStudy> {
    config.validate()?;
    let basis = config.basis()?;
    let cluster = EigenspaceBasis::cluster_at(&config.domain, Bc::Neumann, config.cluster_n)?;
    if !cluster.modes.iter().any(|m| m.k == config.mode) {
        return Err(Error::InvalidInput(format!(
            "cluster_n: mode {:?} is not in the cluster at index {}",
            config.mode, config.cluster_n
        )));
    }
    let (n, mult) = (config.cluster_n, cluster.dim());
    if config.k < n + mult {
        return Err(Error::InvalidInput("k: must exceed the last cluster index".into()));
    }
    let n_dim = config.domain.dim();
    let opts = EigenOptions {
        tol: config.tol,
        seed: config.seed,
        ..EigenOptions::default()
    };
    let rows = config
        .eps
        .par_iter()
        .map(|&eps| -> Result<ProjectionRow> {
            let hole = HoleSpec::new(HoleShape::Disk, config.x0, eps);
            let pair = build_matched_meshes_with(&config.domain, &hole, &MesherOptions::new(config.h_target))?;
            let mesh = &pair.perforated;
            let r = solve_mesh(mesh, Bc::Neumann, &[BoundaryTag::Outer, BoundaryTag::Hole], config.k, &opts)?;
            let lam = &r.eigenvalues;
            let floor = 10.0 * config.tol * lam[n + mult - 2].abs();
            let below = if n >= 2 { lam[n - 1] - lam[n - 2] } else { f64::INFINITY };
            let above = lam[n + mult - 1] - lam[n + mult - 2];
            if below < floor || above < floor {
                return Err(Error::AmbiguousCluster(format!(
                    "eps = {eps}: cluster {n}..{} touches its neighbours",
                    n + mult - 1
                )));
            }
            let phi = mesh
                .vertices
                .iter()
                .map(|p| basis.eval(0, p))
                .collect::<Result<Vec<f64>>>()?;
            let (k, m) = assemble(mesh)?;
            let a = k.linear_combination(1.0, &m, 1.0);
            let d = projection_distance(&a, &m, &r.eigenvectors[n - 1..n - 1 + mult], &phi);
            Ok(ProjectionRow {
                eps,
                distance_sq: d,
                scaled: d / eps.powi(n_dim as i32),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<&ProjectionRow> = rows.iter().filter(|r| r.distance_sq > 0.0).collect();
    let loglog_slope = (positive.len() >= 2)
        .then(|| {
            let x: Vec<f64> = positive.iter().map(|r| r.eps.ln()).collect();
            let y: Vec<f64> = positive.iter().map(|r| r.distance_sq.ln()).collect();
            fit_line_weighted(&x, &y, &vec![1.0; x.len()]).ok().map(|f| f.slope)
        })
        .flatten();
    let extrapolated_limit = (rows.len() >= 2)
        .then(|| {
            let x: Vec<f64> = rows.iter().map(|r| r.eps).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
            let w: Vec<f64> = x.iter().map(|e| 1.0 / e).collect();
            fit_line_weighted(&x, &y, &w).ok().map(|f| f.intercept)
        })
        .flatten();
    Ok(ProjectionStudy {
        config: config.clone(),
        limit: config.limit()?,
        rows,
        loglog_slope,
        extrapolated_limit,
        notes: vec![
            "phi is the nodal interpolant of the analytic mode, so distances carry an O(h^2) consistency error".into(),
            "the two-dimensional projection estimate is exploratory".into(),
        ],
    })
}
