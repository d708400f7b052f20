use std::fmt::Write as _;

use super::fit::{d_table, DRow};
use super::mode::{ProjectionStudy, TorsionDecay};
use super::sweep::SweepResult;
use crate::output::{fmt_f64, Svg};

pub const SWEEP_CSV_HEADER: &str = "eps,cluster_n,branch,lambda_perturbed,lambda_reference,d,residual";

/// One row per ε, cluster and branch.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for DRow {
        eps,
        cluster_n,
        branch,
        lambda_perturbed,
        lambda_reference,
        d,
        residual,
    } in d_table(sweep, sweep.dim())
    {
        let _ = writeln!(
            s,
            "{},{cluster_n},{branch},{},{},{},{}",
            fmt_f64(eps),
            fmt_f64(lambda_perturbed),
            fmt_f64(lambda_reference),
            fmt_f64(d),
            fmt_f64(residual)
        );
    }
    s
}

/// Eigenvalues against ε on a logarithmic axis with the unperturbed values
/// in a separate column at the left; followed clusters are drawn in blue.
pub fn sweep_svg(sweep: &SweepResult, title: &str) -> String {
    let ok: Vec<_> = sweep.records.iter().filter(|r| r.ok()).collect();
    let k = sweep.config.k;
    let mut eps: Vec<f64> = ok.iter().map(|r| r.eps).collect();
    eps.sort_by(f64::total_cmp);
    let (lo, hi) = match (eps.first(), eps.last()) {
        (Some(&a), Some(&b)) if b > a => (a.log2(), b.log2()),
        (Some(&a), _) => (a.log2() - 1.0, a.log2() + 1.0),
        _ => (-1.0, 0.0),
    };
    // the unperturbed column sits one unit left of the smallest ε
    let x_zero = lo - 1.0;
    let mut values: Vec<f64> = ok
        .iter()
        .flat_map(|r| r.perturbed.as_ref().unwrap().eigenvalues.iter().copied())
        .collect();
    values.extend(ok.iter().flat_map(|r| r.filled.as_ref().unwrap().eigenvalues.iter().copied()));
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (vmin, vmax) = if vmin.is_finite() && vmax > vmin { (vmin, vmax) } else { (0.0, 1.0) };
    let pad = 0.05 * (vmax - vmin);
    let bounds = [x_zero - 0.5, hi + 0.5, vmin - pad, vmax + pad];
    let mut svg = Svg::new(900.0, 600.0, bounds);
    svg.frame();
    svg.text_px(40.0, 24.0, title);

    let in_cluster = |j: usize| sweep.clusters.iter().any(|c| j + 1 >= c.n && j < c.n - 1 + c.m);
    let reference: Vec<f64> = ok
        .iter()
        .min_by(|a, b| a.eps.total_cmp(&b.eps))
        .map(|r| r.filled.as_ref().unwrap().eigenvalues.clone())
        .unwrap_or_default();
    let mut by_eps: Vec<(f64, &Vec<f64>)> = ok
        .iter()
        .map(|r| (r.eps.log2(), &r.perturbed.as_ref().unwrap().eigenvalues))
        .collect();
    by_eps.sort_by(|a, b| a.0.total_cmp(&b.0));
    for j in 0..k {
        let mut line: Vec<[f64; 2]> = Vec::new();
        if let Some(&r) = reference.get(j) {
            line.push([x_zero, r]);
        }
        line.extend(by_eps.iter().filter_map(|(x, v)| v.get(j).map(|&y| [*x, y])));
        let (color, width) = if in_cluster(j) { ("#1f4fd1", 2.0) } else { ("#888888", 1.0) };
        svg.polyline(&line, color, width);
        for p in &line {
            svg.circle(p[0], p[1], if in_cluster(j) { 3.0 } else { 2.0 }, color);
        }
    }
    let (_, base) = svg.map(bounds[0], bounds[2]);
    let (px, _) = svg.map(x_zero, bounds[2]);
    svg.text_px(px - 10.0, base + 18.0, "eps=0");
    for &e in &eps {
        let (px, _) = svg.map(e.log2(), bounds[2]);
        svg.text_px(px - 10.0, base + 18.0, &format!("{e}"));
    }
    let mut tick = (vmin * 4.0).ceil() / 4.0;
    while tick <= vmax {
        let (_, py) = svg.map(bounds[0], tick);
        svg.text_px(4.0, py + 4.0, &format!("{tick:.2}"));
        tick += 0.25;
    }
    svg.finish()
}

pub const TORSION_CSV_HEADER: &str = "eps,h1_norm_sq,l2_norm_sq,scaled_energy,l2_h1_ratio";

pub fn torsion_csv(t: &TorsionDecay) -> String {
    let mut s = format!("{TORSION_CSV_HEADER}\n");
    for r in &t.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.eps),
            fmt_f64(r.h1_norm_sq),
            fmt_f64(r.l2_norm_sq),
            fmt_f64(r.scaled_energy),
            fmt_f64(r.l2_h1_ratio)
        );
    }
    s
}

pub const PROJECTION_CSV_HEADER: &str = "eps,distance_sq,scaled";

pub fn projection_csv(p: &ProjectionStudy) -> String {
    let mut s = format!("{PROJECTION_CSV_HEADER}\n");
    for r in &p.rows {
        let _ = writeln!(s, "{},{},{}", fmt_f64(r.eps), fmt_f64(r.distance_sq), fmt_f64(r.scaled));
    }
    s
}

/// Scaled quantity against ε with the predicted limit as a dashed level.
pub fn scaled_svg(title: &str, eps: &[f64], scaled: &[f64], limit: f64) -> String {
    let xmax = eps.iter().copied().fold(0.0, f64::max) * 1.1;
    let ymax = scaled.iter().copied().fold(limit, f64::max) * 1.15;
    let mut svg = Svg::new(700.0, 450.0, [0.0, xmax.max(1e-12), 0.0, ymax.max(1e-12)]);
    svg.frame();
    svg.text_px(40.0, 24.0, title);
    svg.polyline(&[[0.0, limit], [xmax, limit]], "#c00000", 1.0);
    let pts: Vec<[f64; 2]> = eps.iter().zip(scaled).map(|(&e, &v)| [e, v]).collect();
    svg.polyline(&pts, "#1f4fd1", 2.0);
    for p in &pts {
        svg.circle(p[0], p[1], 3.0, "#1f4fd1");
    }
    svg.finish()
}
