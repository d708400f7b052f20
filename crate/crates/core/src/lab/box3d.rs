use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    analytic_spectrum, gamma_eigenvalues, neumann_form_matrix, predict_branches, Bc, EigenspaceBasis, ModeIndex,
};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

pub const BALL_HOLE_LABEL: &str = "ball-hole prediction";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxClusterPrediction {
    pub lambda: f64,
    pub modes: Vec<ModeIndex>,
    /// Descending.
    pub gamma: Vec<f64>,
    /// Smallest difference between consecutive γ.
    pub min_gap: f64,
    pub distinct: bool,
    /// `branches[j]` holds the ascending predictions at `eps[j]`.
    pub branches: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPrediction {
    pub label: String,
    pub domain: DomainSpec,
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    /// Draws rejected for lying too close to a coincidence set.
    pub rejected_draws: usize,
    pub clusters: Vec<BoxClusterPrediction>,
}

/// Relative separation below which γ values count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-3;

fn cluster_prediction(basis: &EigenspaceBasis, x0: &[f64], eps: &[f64]) -> Result<BoxClusterPrediction> {
    let gamma = gamma_eigenvalues(&neumann_form_matrix(basis, x0, 3)?);
    let scale = gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let min_gap = gamma.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    Ok(BoxClusterPrediction {
        lambda: basis.lambda,
        modes: basis.modes.clone(),
        branches: eps.iter().map(|&e| predict_branches(basis.lambda, &gamma, e, 3)).collect(),
        distinct: min_gap > COINCIDENCE_TOL * scale,
        min_gap,
        gamma,
    })
}

/// Ball-hole predictions for every multiple eigenvalue of the box in
/// `[lambda_min, lambda_max]`. The centre is drawn uniformly from the box
/// shrunk by `margin`, and redrawn while any cluster has coinciding γ.
pub fn predict_box(
    domain: &DomainSpec,
    seed: u64,
    eps: &[f64],
    lambda_range: [f64; 2],
    margin: f64,
) -> Result<BoxPrediction> {
    if domain.dim() != 3 {
        return Err(Error::InvalidInput("box predictions need a three-dimensional box".into()));
    }
    domain.validate()?;
    if eps.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidInput("eps: values must be non-negative".into()));
    }
    let ext = domain.extents();
    if ext.iter().any(|(lo, hi)| hi - lo <= 2.0 * margin) {
        return Err(Error::InvalidInput(format!("margin {margin} leaves no room in the box")));
    }
    let bases: Vec<EigenspaceBasis> = analytic_spectrum(domain, Bc::Neumann, 64)
        .into_iter()
        .filter(|c| c.multiplicity >= 2 && c.lambda >= lambda_range[0] && c.lambda <= lambda_range[1])
        .map(|c| EigenspaceBasis::new(*domain, c.modes))
        .collect::<Result<_>>()?;
    if bases.is_empty() {
        return Err(Error::InvalidInput("no multiple eigenvalue in the requested range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for rejected in 0..1000 {
        let x0: Vec<f64> = ext.iter().map(|(lo, hi)| rng.gen_range(lo + margin..hi - margin)).collect();
        let clusters = bases
            .iter()
            .map(|b| cluster_prediction(b, &x0, eps))
            .collect::<Result<Vec<_>>>()?;
        if clusters.iter().all(|c| c.distinct) {
            return Ok(BoxPrediction {
                label: BALL_HOLE_LABEL.into(),
                domain: *domain,
                x0,
                eps: eps.to_vec(),
                rejected_draws: rejected,
                clusters,
            });
        }
    }
    Err(Error::InvalidInput("could not draw a centre off the coincidence sets".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eps() -> Vec<f64> {
        (0..=10).map(|i| 0.05 * i as f64).collect()
    }

    #[test]
    fn triple_cluster_splits_in_three() {
        let p = predict_box(&DomainSpec::reference_box(), 7, &eps(), [3.4, 4.1], 0.6).unwrap();
        assert_eq!(p.label, BALL_HOLE_LABEL);
        assert_eq!(p.clusters.len(), 3);
        let triple = &p.clusters[0];
        assert!((triple.lambda - (1.0 + PI * PI / 4.0)).abs() < 1e-12);
        assert_eq!(triple.gamma.len(), 3);
        assert!(triple.distinct);
        assert!(triple.branches[0].iter().all(|&v| v == triple.lambda));
        let last = triple.branches.last().unwrap();
        assert!(last[0] < last[1] && last[1] < last[2]);
        assert!((p.clusters[1].lambda - 3.741).abs() < 1e-3 && (p.clusters[2].lambda - 4.084).abs() < 1e-3);
    }

    #[test]
    fn seeded_draw_is_reproducible() {
        let a = predict_box(&DomainSpec::reference_box(), 3, &eps(), [3.4, 4.1], 0.6).unwrap();
        let b = predict_box(&DomainSpec::reference_box(), 3, &eps(), [3.4, 4.1], 0.6).unwrap();
        assert_eq!(a, b);
        assert!(predict_box(&DomainSpec::reference_rectangle(), 3, &eps(), [3.4, 4.1], 0.6).is_err());
    }
}
