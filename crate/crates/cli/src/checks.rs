use serde::{Deserialize, Serialize};
use speclab::asymptotics::Bc;
use speclab::lab::{dirichlet_structure, fit_slopes, splitting_report, ClusterFit, DirichletStructure, SplittingReport, SweepResult};

use crate::manifest::Check;

/// Splitting is required from this ε upwards.
pub const SPLIT_EPS_MIN: f64 = 0.25;
/// Relative tolerance on fitted limits and their sum.
pub const SLOPE_TOL: f64 = 0.15;
/// Relative tolerance on predicted branch gaps (reported only).
pub const GAP_TOL: f64 = 0.25;
/// Relative tolerance of the filled-mesh cluster mean against the analytic value.
pub const REFERENCE_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEvaluation {
    pub splitting: SplittingReport,
    pub fits: Option<Vec<ClusterFit>>,
    pub dirichlet: Option<Vec<DirichletStructure>>,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

/// Splitting, sign, slope and structure checks of a finished sweep. Slope
/// checks gate only the first followed cluster; later clusters are reported.
pub fn evaluate_sweep(sweep: &SweepResult) -> SweepEvaluation {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let ok: Vec<_> = sweep.records.iter().filter(|r| r.ok()).collect();
    let failed: Vec<f64> = sweep.records.iter().filter(|r| !r.ok()).map(|r| r.eps).collect();
    checks.push(Check::gating(
        "solves",
        failed.is_empty(),
        if failed.is_empty() {
            "every eps solved".to_string()
        } else {
            format!("failed at eps = {}", fmt_list(&failed))
        },
    ));

    for (c, info) in sweep.clusters.iter().enumerate() {
        let worst = ok
            .iter()
            .map(|r| (r.branches[c].reference_mean - info.lambda).abs() / info.lambda)
            .fold(0.0, f64::max);
        checks.push(Check::gating(
            format!("cluster {} reference", info.n),
            worst <= REFERENCE_TOL,
            format!("filled-mesh mean within {worst:.2e} of the analytic {:.6}", info.lambda),
        ));
    }
    checks.push(Check::info(
        "filled spread",
        sweep.filled_spread <= 10.0 * sweep.config.tol,
        format!(
            "filled-mesh cluster means vary by {:.2e} across eps (solver tol {:.0e})",
            sweep.filled_spread, sweep.config.tol
        ),
    ));

    let splitting = splitting_report(sweep, 0.0);
    for info in &sweep.clusters {
        let required: Vec<_> = splitting
            .verdicts
            .iter()
            .filter(|v| v.cluster_n == info.n && v.eps >= SPLIT_EPS_MIN * (1.0 - 1e-12))
            .collect();
        if required.is_empty() {
            continue;
        }
        let unsplit: Vec<f64> = required.iter().filter(|v| !v.split).map(|v| v.eps).collect();
        checks.push(Check::gating(
            format!("cluster {} splits", info.n),
            unsplit.is_empty(),
            if unsplit.is_empty() {
                format!("split at eps = {}", fmt_list(&required.iter().map(|v| v.eps).collect::<Vec<_>>()))
            } else {
                format!("not split at eps = {}", fmt_list(&unsplit))
            },
        ));
        let [lo, hi] = sweep.config.fit_range;
        let gap_errors: Vec<f64> = splitting
            .verdicts
            .iter()
            .filter(|v| v.cluster_n == info.n && v.eps >= lo * (1.0 - 1e-12) && v.eps <= hi * (1.0 + 1e-12))
            .filter_map(|v| v.gap_relative_error.as_ref())
            .flatten()
            .copied()
            .collect();
        if !gap_errors.is_empty() {
            let worst = gap_errors.iter().copied().fold(0.0, f64::max);
            checks.push(Check::info(
                format!("cluster {} predicted gaps", info.n),
                worst <= GAP_TOL,
                format!("worst relative gap error {worst:.3} over eps in [{lo}, {hi}]"),
            ));
        }
    }

    if sweep.config.bc == Bc::Neumann {
        for (c, info) in sweep.clusters.iter().enumerate() {
            let Some(gamma) = &info.predicted else { continue };
            let mut above = Vec::new();
            for r in &ok {
                let b = &r.branches[c];
                let reference = b.reference.iter().copied().fold(f64::INFINITY, f64::min);
                for (i, (&g, &lam)) in gamma.iter().zip(&b.perturbed).enumerate() {
                    if g > 0.0 && lam >= reference {
                        above.push(format!("branch {} at eps = {}", i + 1, r.eps));
                    }
                }
            }
            checks.push(Check::gating(
                format!("cluster {} sign", info.n),
                above.is_empty(),
                if above.is_empty() {
                    "branches with positive predicted coefficient stay below the reference".to_string()
                } else {
                    format!("at or above the reference: {}", above.join("; "))
                },
            ));
        }
    }

    let has_predictions = sweep.clusters.iter().any(|c| c.predicted.is_some());
    let fits = if has_predictions {
        match fit_slopes(sweep, sweep.dim()) {
            Ok(f) => Some(f),
            Err(e) => {
                notes.push(format!("slopes not fitted: {e}"));
                None
            }
        }
    } else {
        None
    };
    if let (Some(fits), Bc::Neumann) = (&fits, sweep.config.bc) {
        for (c, fit) in fits.iter().enumerate() {
            let make = if c == 0 { Check::gating } else { Check::info };
            for b in &fit.branches {
                let (Some(p), Some(err)) = (b.predicted, b.relative_error) else { continue };
                checks.push(make(
                    format!("cluster {} branch {} slope", fit.n, b.branch),
                    err <= SLOPE_TOL,
                    format!(
                        "fitted {:.6} vs predicted {p:.6} (relative error {err:.3}{})",
                        b.gamma_hat,
                        if b.unreliable { ", unreliable" } else { "" }
                    ),
                ));
            }
            if let (Some(t), Some(err)) = (fit.trace, fit.trace_relative_error) {
                checks.push(make(
                    format!("cluster {} trace", fit.n),
                    err <= SLOPE_TOL,
                    format!("sum of fits {:.6} vs trace {t:.6} (relative error {err:.3})", fit.sum_gamma_hat),
                ));
            }
        }
    }

    let dirichlet = if sweep.config.bc == Bc::Dirichlet {
        match dirichlet_structure(sweep) {
            Ok(d) => {
                for s in &d {
                    checks.push(Check::gating(
                        format!("cluster {} monotone", s.cluster_n),
                        s.all_above_reference,
                        format!("smallest perforated minus filled eigenvalue {:.3e}", s.min_margin),
                    ));
                    checks.push(Check::gating(
                        format!("cluster {} single branch", s.cluster_n),
                        s.single_branch_moves,
                        format!(
                            "branch {} leads; other branches at {:.3} of its scaled deviation",
                            s.leading_branch, s.others_ratio
                        ),
                    ));
                }
                Some(d)
            }
            Err(e) => {
                notes.push(format!("Dirichlet structure not evaluated: {e}"));
                None
            }
        }
    } else {
        None
    };

    SweepEvaluation {
        splitting,
        fits,
        dirichlet,
        notes,
        checks,
    }
}
