use serde::{Deserialize, Serialize};

use super::EigenResult;
use crate::error::{Error, Result};

/// Perturbed cluster eigenvalues paired with branch labels by order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchAssignment {
    /// First index of the cluster (1-based).
    pub n: usize,
    pub m: usize,
    /// `perturbed[i]` belongs to branch `i + 1`.
    pub perturbed: Vec<f64>,
    pub reference: Vec<f64>,
    pub reference_mean: f64,
    /// Consecutive differences inside the perturbed cluster.
    pub gaps: Vec<f64>,
    /// Distance to the neighbouring eigenvalues outside the cluster, if computed.
    pub gap_below: Option<f64>,
    pub gap_above: Option<f64>,
    pub ambiguous: bool,
}

/// Pairs branch `i` with the `i`-th smallest perturbed eigenvalue of the
/// cluster `n..n+m-1`. The cluster is ambiguous when it comes closer than
/// `10·tol` (relative) to the rest of the perturbed spectrum.
pub fn track_branches(reference: &EigenResult, perturbed: &EigenResult, n: usize, m: usize) -> Result<BranchAssignment> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("cluster indices are 1-based and m ≥ 1".into()));
    }
    let last = n + m - 1;
    if reference.eigenvalues.len() < last || perturbed.eigenvalues.len() < last {
        return Err(Error::InvalidInput(format!(
            "cluster {n}..={last} exceeds the computed spectrum"
        )));
    }
    let mut cluster = perturbed.eigenvalues[n - 1..last].to_vec();
    cluster.sort_by(f64::total_cmp);
    let reference_vals = reference.eigenvalues[n - 1..last].to_vec();
    let reference_mean = reference_vals.iter().sum::<f64>() / m as f64;
    let gaps: Vec<f64> = cluster.windows(2).map(|w| w[1] - w[0]).collect();
    let gap_below = (n >= 2).then(|| cluster[0] - perturbed.eigenvalues[n - 2]);
    let gap_above = perturbed.eigenvalues.get(last).map(|&v| v - cluster[m - 1]);
    let floor = 10.0 * perturbed.tol * cluster[m - 1].abs();
    let ambiguous = gap_below.is_some_and(|g| g < floor) || gap_above.is_some_and(|g| g < floor);
    Ok(BranchAssignment {
        n,
        m,
        perturbed: cluster,
        reference: reference_vals,
        reference_mean,
        gaps,
        gap_below,
        gap_above,
        ambiguous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(v: &[f64]) -> EigenResult {
        EigenResult {
            eigenvalues: v.to_vec(),
            eigenvectors: vec![],
            residuals: vec![0.0; v.len()],
            tol: 1e-9,
            seed: 0,
            method: "synthetic".into(),
            iterations: 0,
            inertia: vec![],
            certified: true,
        }
    }

    #[test]
    fn identical_spectra() {
        let r = result(&[1.0, 2.0, 2.0, 3.0]);
        let b = track_branches(&r, &r, 2, 2).unwrap();
        assert_eq!(b.perturbed, vec![2.0, 2.0]);
        assert_eq!(b.gaps, vec![0.0]);
        assert!(!b.ambiguous);
    }

    #[test]
    fn synthetic_split() {
        let reference = result(&[1.0, 2.0, 2.0, 3.0]);
        let perturbed = result(&[1.0, 2.0, 2.001, 3.0]);
        let b = track_branches(&reference, &perturbed, 2, 2).unwrap();
        assert_eq!(b.perturbed, vec![2.0, 2.001]);
        assert!((b.gaps[0] - 1e-3).abs() < 1e-15);
        assert_eq!(b.reference_mean, 2.0);
    }

    #[test]
    fn overlap_flagged() {
        let reference = result(&[1.0, 2.0, 2.0]);
        let perturbed = result(&[2.0, 2.0, 2.1]);
        assert!(track_branches(&reference, &perturbed, 2, 2).unwrap().ambiguous);
        assert!(track_branches(&reference, &perturbed, 3, 2).is_err());
    }
}
