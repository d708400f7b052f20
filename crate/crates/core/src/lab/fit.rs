use serde::{Deserialize, Serialize};

use super::sweep::SweepResult;
use crate::asymptotics::Bc;
use crate::error::{Error, Result};

/// `ε^N` for Neumann and in dimension N ≥ 3; `1/|log ε|` for the planar
/// Dirichlet problem. `None` where the scale vanishes or is undefined.
pub fn eps_scale(bc: Bc, eps: f64, n: usize) -> Option<f64> {
    let s = match (bc, n) {
        (Bc::Dirichlet, 2) => 1.0 / eps.ln().abs(),
        (Bc::Dirichlet, _) => eps.powi(n as i32 - 2),
        (Bc::Neumann, _) => eps.powi(n as i32),
    };
    (s.is_finite() && s > 0.0).then_some(s)
}

/// One row of the flat sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DRow {
    pub eps: f64,
    pub cluster_n: usize,
    /// 1-based.
    pub branch: usize,
    pub lambda_perturbed: f64,
    pub lambda_reference: f64,
    /// `(λ_reference − λ_perturbed) / scale(ε)`.
    pub d: f64,
    pub residual: f64,
}

pub fn d_table(sweep: &SweepResult, n: usize) -> Vec<DRow> {
    let mut rows = Vec::new();
    for rec in sweep.records.iter().filter(|r| r.ok()) {
        let Some(scale) = eps_scale(sweep.config.bc, rec.eps, n) else {
            continue;
        };
        let pert = rec.perturbed.as_ref().expect("successful record has a solve");
        for b in &rec.branches {
            for (i, &lam) in b.perturbed.iter().enumerate() {
                rows.push(DRow {
                    eps: rec.eps,
                    cluster_n: b.n,
                    branch: i + 1,
                    lambda_perturbed: lam,
                    lambda_reference: b.reference_mean,
                    d: (b.reference_mean - lam) / scale,
                    residual: pert.residuals[b.n - 1 + i],
                });
            }
        }
    }
    rows
}

/// Weighted least-squares line `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the intercept; zero for exact or two-point fits.
    pub intercept_se: f64,
    /// Weighted root-mean-square residual.
    pub residual_rms: f64,
}

pub fn fit_line_weighted(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return Err(Error::InvalidInput("a line fit needs at least two weighted points".into()));
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w[i] * (x[i] - xm).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("line fit needs two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let intercept_se = if n > 2 {
        let sigma2 = ssr / (n as f64 - 2.0);
        (sigma2 * (1.0 / sw + xm * xm / sxx)).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        intercept,
        slope,
        intercept_se,
        residual_rms: (ssr / sw).sqrt(),
    })
}

/// Two-sided 95% Student t quantile.
fn t95(dof: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    match dof {
        0 => f64::INFINITY,
        1..=10 => T[dof - 1],
        11..=30 => 2.228 - (dof as f64 - 10.0) * (2.228 - 2.042) / 20.0,
        _ => 1.96,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFit {
    pub branch: usize,
    pub eps: Vec<f64>,
    pub d: Vec<f64>,
    /// Limit `γ̂` of `d(ε) = γ̂ + c ε`.
    pub gamma_hat: f64,
    pub slope: f64,
    pub ci95: [f64; 2],
    pub residual_rms: f64,
    /// `(max d − min d)/|mean d|`.
    pub spread: f64,
    pub monotone: bool,
    /// Spread above 50%.
    pub unreliable: bool,
    /// Predicted limit of `d`: `γ_i` (Neumann) or `−ζ_i` (Dirichlet).
    pub predicted: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    pub n: usize,
    pub m: usize,
    pub branches: Vec<BranchFit>,
    pub sum_gamma_hat: f64,
    /// Trace of the limit form, where known.
    pub trace: Option<f64>,
    pub trace_relative_error: Option<f64>,
}

/// Fits `d_i(ε) = γ̂_i + c ε` with weights `1/ε` over the ε in the configured
/// fit range, for every followed cluster.
pub fn fit_slopes(sweep: &SweepResult, n: usize) -> Result<Vec<ClusterFit>> {
    let [lo, hi] = sweep.config.fit_range;
    let rows: Vec<DRow> = d_table(sweep, n)
        .into_iter()
        .filter(|r| r.eps >= lo * (1.0 - 1e-12) && r.eps <= hi * (1.0 + 1e-12))
        .collect();
    let mut out = Vec::new();
    for info in &sweep.clusters {
        let mut branches = Vec::new();
        for i in 1..=info.m {
            let pts: Vec<&DRow> = rows.iter().filter(|r| r.cluster_n == info.n && r.branch == i).collect();
            if pts.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "cluster {} branch {i}: need at least 3 usable eps in [{lo}, {hi}], got {}",
                    info.n,
                    pts.len()
                )));
            }
            let eps: Vec<f64> = pts.iter().map(|r| r.eps).collect();
            let d: Vec<f64> = pts.iter().map(|r| r.d).collect();
            let w: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
            let line = fit_line_weighted(&eps, &d, &w)?;
            let half = t95(pts.len() - 2) * line.intercept_se;
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let (dmin, dmax) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let spread = (dmax - dmin) / mean.abs();
            let monotone = d.windows(2).all(|p| p[0] <= p[1]) || d.windows(2).all(|p| p[0] >= p[1]);
            let predicted = info.predicted.as_ref().map(|p| match sweep.config.bc {
                Bc::Neumann => p[i - 1],
                Bc::Dirichlet => -p[i - 1],
            });
            branches.push(BranchFit {
                branch: i,
                eps,
                d,
                gamma_hat: line.intercept,
                slope: line.slope,
                ci95: [line.intercept - half, line.intercept + half],
                residual_rms: line.residual_rms,
                spread,
                monotone,
                unreliable: !(spread <= 0.5),
                predicted,
                relative_error: predicted.filter(|&p| p != 0.0).map(|p| (line.intercept - p).abs() / p.abs()),
            });
        }
        let sum_gamma_hat: f64 = branches.iter().map(|b| b.gamma_hat).sum();
        let trace = match sweep.config.bc {
            Bc::Neumann => info.trace,
            Bc::Dirichlet => info.trace.map(|t| -t),
        };
        out.push(ClusterFit {
            n: info.n,
            m: info.m,
            branches,
            sum_gamma_hat,
            trace,
            trace_relative_error: trace.map(|t| (sum_gamma_hat - t).abs() / t.abs()),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitVerdict {
    pub eps: f64,
    pub cluster_n: usize,
    pub gaps: Vec<f64>,
    /// `max(threshold, 10 · residual scale)`.
    pub floor: f64,
    pub split: bool,
    pub predicted_gaps: Option<Vec<f64>>,
    pub gap_relative_error: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub threshold: f64,
    pub verdicts: Vec<SplitVerdict>,
    /// Per cluster: smallest ε at which every gap is certified.
    pub smallest_split_eps: Vec<(usize, Option<f64>)>,
}

/// Declares a cluster split at ε when every consecutive gap exceeds both
/// `threshold` and ten times the residual scale `max_i r_i |λ_i|`.
pub fn splitting_report(sweep: &SweepResult, threshold: f64) -> SplittingReport {
    let n_dim = sweep.dim();
    let mut verdicts = Vec::new();
    for rec in sweep.records.iter().filter(|r| r.ok()) {
        let pert = rec.perturbed.as_ref().expect("successful record has a solve");
        for (c, b) in rec.branches.iter().enumerate() {
            let scale = b
                .perturbed
                .iter()
                .enumerate()
                .map(|(i, lam)| pert.residuals[b.n - 1 + i] * lam.abs())
                .fold(0.0, f64::max);
            let floor = threshold.max(10.0 * scale);
            let predicted_gaps = sweep.clusters[c].predicted.as_ref().and_then(|p| {
                let s = eps_scale(sweep.config.bc, rec.eps, n_dim)?;
                Some(
                    p.windows(2)
                        .map(|w| match sweep.config.bc {
                            Bc::Neumann => (w[0] - w[1]) * s,
                            Bc::Dirichlet => (w[1] - w[0]) * s,
                        })
                        .collect::<Vec<f64>>(),
                )
            });
            let gap_relative_error = predicted_gaps.as_ref().map(|pg| {
                pg.iter()
                    .zip(&b.gaps)
                    .map(|(p, g)| (g - p).abs() / p.abs())
                    .collect()
            });
            verdicts.push(SplitVerdict {
                eps: rec.eps,
                cluster_n: b.n,
                gaps: b.gaps.clone(),
                floor,
                split: b.gaps.iter().all(|&g| g > floor),
                predicted_gaps,
                gap_relative_error,
            });
        }
    }
    let smallest_split_eps = sweep
        .clusters
        .iter()
        .map(|c| {
            let eps = verdicts
                .iter()
                .filter(|v| v.cluster_n == c.n && v.split)
                .map(|v| v.eps)
                .reduce(f64::min);
            (c.n, eps)
        })
        .collect();
    SplittingReport {
        threshold,
        verdicts,
        smallest_split_eps,
    }
}

/// Dirichlet checks for one cluster: the perturbed spectrum never drops
/// below the filled one, and only the top branch moves at leading order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletStructure {
    pub cluster_n: usize,
    /// `min_j (λ_j^perforated − λ_j^filled)` over all ε and all computed j.
    pub min_margin: f64,
    pub all_above_reference: bool,
    /// At the smallest ε: `(λ_i − reference) · |log ε|`.
    pub scaled_deviation: Vec<f64>,
    /// Branch (1-based) with the largest scaled deviation.
    pub leading_branch: usize,
    /// Largest scaled deviation of the other branches over the leading one.
    pub others_ratio: f64,
    pub single_branch_moves: bool,
}

pub fn dirichlet_structure(sweep: &SweepResult) -> Result<Vec<DirichletStructure>> {
    if sweep.config.bc != Bc::Dirichlet {
        return Err(Error::InvalidInput("Dirichlet structure needs a Dirichlet sweep".into()));
    }
    let ok: Vec<_> = sweep.records.iter().filter(|r| r.ok()).collect();
    let last = ok
        .iter()
        .copied()
        .min_by(|a, b| a.eps.total_cmp(&b.eps))
        .ok_or_else(|| Error::InvalidInput("no successful record".into()))?;
    let mut min_margin = f64::INFINITY;
    let mut slack: f64 = 0.0;
    for r in &ok {
        let (p, f) = (r.perturbed.as_ref().unwrap(), r.filled.as_ref().unwrap());
        for (j, (a, b)) in p.eigenvalues.iter().zip(&f.eigenvalues).enumerate() {
            min_margin = min_margin.min(a - b);
            slack = slack.max(10.0 * (p.residuals[j] * a.abs()).max(f.residuals[j] * b.abs()));
        }
    }
    let scale = eps_scale(Bc::Dirichlet, last.eps, sweep.dim())
        .ok_or_else(|| Error::InvalidInput(format!("eps = {} has no logarithmic scale", last.eps)))?;
    Ok(last
        .branches
        .iter()
        .map(|b| {
            let dev: Vec<f64> = b.perturbed.iter().map(|l| (l - b.reference_mean) / scale).collect();
            let (lead, top) = dev
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let others = dev
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != lead)
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max);
            let ratio = others / top;
            DirichletStructure {
                cluster_n: b.n,
                min_margin,
                all_above_reference: min_margin >= -slack,
                scaled_deviation: dev,
                leading_branch: lead + 1,
                others_ratio: ratio,
                single_branch_moves: lead + 1 == b.m && ratio <= 1.0 / 3.0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::BranchAssignment;
    use crate::lab::{cluster_info, EpsRecord, PencilSolve, SweepConfig};

    fn synthetic(bc: Bc, eps: &[f64], cluster: impl Fn(f64) -> Vec<f64>, reference: f64) -> SweepResult {
        let mut config = match bc {
            Bc::Neumann => SweepConfig::validation(),
            Bc::Dirichlet => SweepConfig::dirichlet(),
        };
        config.clusters.truncate(1);
        config.eps = eps.to_vec();
        let clusters = cluster_info(&config).unwrap();
        let n = clusters[0].n;
        let records = eps
            .iter()
            .map(|&e| {
                let vals = cluster(e);
                let m = vals.len();
                let mut all: Vec<f64> = (0..n - 1).map(|j| j as f64 * 0.1).collect();
                all.extend(&vals);
                all.push(reference + 10.0);
                let mut filled: Vec<f64> = (0..n - 1).map(|j| j as f64 * 0.1).collect();
                filled.extend(vec![reference; m]);
                filled.push(reference + 10.0);
                let solve = |v: Vec<f64>| PencilSolve {
                    residuals: vec![1e-12; v.len()],
                    eigenvalues: v,
                    certified: true,
                    iterations: 0,
                    method: "synthetic".into(),
                };
                EpsRecord {
                    eps: e,
                    in_asymptotic_regime: true,
                    error: None,
                    perturbed: Some(solve(all)),
                    filled: Some(solve(filled)),
                    perforated_mesh: None,
                    filled_mesh: None,
                    branches: vec![BranchAssignment {
                        n,
                        m,
                        gaps: vals.windows(2).map(|w| w[1] - w[0]).collect(),
                        perturbed: vals,
                        reference: vec![reference; m],
                        reference_mean: reference,
                        gap_below: None,
                        gap_above: None,
                        ambiguous: false,
                    }],
                }
            })
            .collect();
        SweepResult {
            config,
            clusters,
            records,
            filled_spread: 0.0,
            notes: vec![],
        }
    }

    const EPS: [f64; 5] = [0.5, 0.4, 0.3, 0.2, 0.1];

    #[test]
    fn exact_model_recovered() {
        let (g, c) = ([0.7, 0.3], [0.2, -0.1]);
        let s = synthetic(Bc::Neumann, &EPS, |e| (0..2).map(|i| 1.6 - (g[i] + c[i] * e) * e * e).collect(), 1.6);
        let fits = fit_slopes(&s, 2).unwrap();
        for (i, b) in fits[0].branches.iter().enumerate() {
            assert!((b.gamma_hat - g[i]).abs() < 1e-12, "{}", b.gamma_hat);
            assert!((b.slope - c[i]).abs() < 1e-10);
            assert!(!b.unreliable);
            assert!(b.ci95[0] <= b.gamma_hat && b.gamma_hat <= b.ci95[1]);
        }
        assert!((fits[0].sum_gamma_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_branch_is_unreliable() {
        let s = synthetic(
            Bc::Neumann,
            &EPS,
            |e| vec![1.6 - e * e * if e > 0.25 { 1.0 } else { 0.1 }, 1.6 - 0.05 * e * e],
            1.6,
        );
        let fits = fit_slopes(&s, 2).unwrap();
        assert!(fits[0].branches[0].unreliable);
        assert!(!fits[0].branches[1].unreliable);
    }

    #[test]
    fn too_few_points_rejected() {
        let s = synthetic(Bc::Neumann, &[0.5, 0.1], |_| vec![1.5, 1.55], 1.6);
        assert!(fit_slopes(&s, 2).is_err());
    }

    #[test]
    fn weighted_line_exact() {
        let f = fit_line_weighted(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0], &[1.0, 0.5, 0.25]).unwrap();
        assert!((f.intercept - 1.0).abs() < 1e-14 && (f.slope - 2.0).abs() < 1e-14);
        assert!(f.intercept_se.abs() < 1e-7);
        assert!(fit_line_weighted(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn equal_values_never_split() {
        let s = synthetic(Bc::Neumann, &EPS, |_| vec![1.6, 1.6], 1.6);
        let r = splitting_report(&s, 0.0);
        assert!(r.verdicts.iter().all(|v| !v.split));
        assert_eq!(r.smallest_split_eps, vec![(3, None)]);
        let s = synthetic(Bc::Neumann, &EPS, |e| vec![1.6 - e * e, 1.6 - 0.5 * e * e], 1.6);
        let r = splitting_report(&s, 1e-6);
        assert!(r.verdicts.iter().all(|v| v.split));
        assert_eq!(r.smallest_split_eps, vec![(3, Some(0.1))]);
    }

    #[test]
    fn dirichlet_scale_and_structure() {
        assert_eq!(eps_scale(Bc::Dirichlet, 1.0, 2), None);
        assert!((eps_scale(Bc::Dirichlet, 0.1, 2).unwrap() - 1.0 / 10f64.ln()).abs() < 1e-15);
        assert_eq!(eps_scale(Bc::Dirichlet, 0.5, 3), Some(0.5));
        let lam = 20.0 * std::f64::consts::PI.powi(2) / 64.0;
        let s = synthetic(Bc::Dirichlet, &[0.5, 0.25, 0.1], |e| vec![lam + 0.01 * e * e, lam + 0.2 / e.ln().abs()], lam);
        let st = dirichlet_structure(&s).unwrap();
        assert!(st[0].all_above_reference && st[0].single_branch_moves);
        assert_eq!(st[0].leading_branch, 2);
        let fits = fit_slopes(&s, 2).unwrap();
        assert!((fits[0].branches[1].gamma_hat + 0.2).abs() < 1e-2);
    }
}
