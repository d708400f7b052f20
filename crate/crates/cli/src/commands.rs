use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use speclab::asymptotics::{gamma_map, Bc, EigenspaceBasis, GammaMap, PointClearance};
use speclab::geometry::{DomainSpec, Point};
use speclab::lab::{
    predict_box, projection_csv, projection_experiment, run_sweep, scaled_svg, sweep_csv, sweep_svg, torsion_csv,
    torsion_decay_experiment, BoxPrediction, ModeExperimentConfig, SweepConfig, SweepResult, SCHEMA_VERSION,
};
use speclab::output::fmt_f64;
use speclab::smalleig::fuzz;

use crate::checks::{evaluate_sweep, SweepEvaluation};
use crate::manifest::{Check, Run, RunManifest};
use crate::CliError;

/// Flags shared by every command.
#[derive(Debug, Clone)]
pub struct Common {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tol: Option<f64>,
    pub record_time: bool,
}

impl Common {
    fn run(&self, command: &'static str) -> Run {
        Run::new(command, &self.out_dir, self.record_time, self.threads)
    }

    fn warn_unused_tol(&self, command: &str) {
        if self.tol.is_some() {
            eprintln!("note: --tol has no effect on {command}");
        }
    }
}

fn config_error(e: speclab::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn numerical(e: speclab::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn print_checks(checks: &[Check]) {
    for c in checks {
        let tag = match (c.pass, c.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "note",
        };
        println!("{tag:<5} {:<28} {}", c.name, c.detail);
    }
}

/// One row per successful ε: the perturbed eigenvalues in ascending order.
fn eigenvalue_csv(sweep: &SweepResult) -> String {
    let mut s = String::from("eps");
    for j in 1..=sweep.config.k {
        let _ = write!(s, ",lambda_{j}");
    }
    s.push('\n');
    for r in sweep.records.iter().filter(|r| r.ok()) {
        let p = r.perturbed.as_ref().expect("successful record has a solve");
        s.push_str(&fmt_f64(r.eps));
        for v in &p.eigenvalues {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct SweepReport<'a> {
    sweep: &'a SweepResult,
    evaluation: &'a SweepEvaluation,
}

fn print_sweep(sweep: &SweepResult, eval: &SweepEvaluation) {
    println!("{:>8} {:>8} {:>14} {:>12} {:>6}", "eps", "cluster", "gap", "floor", "split");
    for v in &eval.splitting.verdicts {
        let gap = v.gaps.iter().copied().fold(f64::INFINITY, f64::min);
        println!("{:>8} {:>8} {:>14.6e} {:>12.2e} {:>6}", v.eps, v.cluster_n, gap, v.floor, v.split);
    }
    if let Some(fits) = &eval.fits {
        println!("{:>8} {:>7} {:>12} {:>12} {:>9}", "cluster", "branch", "fitted", "predicted", "rel.err");
        for f in fits {
            for b in &f.branches {
                let p = b.predicted.map(|p| format!("{p:.6}")).unwrap_or_else(|| "-".into());
                let e = b.relative_error.map(|e| format!("{e:.3}")).unwrap_or_else(|| "-".into());
                println!("{:>8} {:>7} {:>12.6} {:>12} {:>9}", f.n, b.branch, b.gamma_hat, p, e);
            }
        }
    }
    if let Some(d) = &eval.dirichlet {
        for s in d {
            println!(
                "cluster {}: min margin {:.3e}, leading branch {}, others ratio {:.4}",
                s.cluster_n, s.min_margin, s.leading_branch, s.others_ratio
            );
        }
    }
    for n in sweep.notes.iter().chain(&eval.notes) {
        println!("note: {n}");
    }
}

/// Runs a sweep and writes its JSON, CSV and SVG outputs.
fn sweep_pipeline(mut run: Run, config: &SweepConfig, title: &str) -> Result<RunManifest, CliError> {
    let sweep = run_sweep(config).map_err(numerical)?;
    let eval = evaluate_sweep(&sweep);
    run.write_json("sweep.json", &SweepReport {
        sweep: &sweep,
        evaluation: &eval,
    })?;
    run.write("sweep.csv", &sweep_csv(&sweep))?;
    run.write("eigenvalues.csv", &eigenvalue_csv(&sweep))?;
    run.write("sweep.svg", &sweep_svg(&sweep, title))?;
    print_sweep(&sweep, &eval);
    let checks = eval.checks.clone();
    print_checks(&checks);
    run.finish(config, config.seed, false, checks)
}

fn apply_overrides(config: &mut SweepConfig, common: &Common) {
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(tol) = common.tol {
        config.tol = tol;
    }
}

pub fn validate(common: &Common, dry_run: bool, eps: Option<Vec<f64>>) -> Result<RunManifest, CliError> {
    let mut config = SweepConfig::validation();
    apply_overrides(&mut config, common);
    if let Some(eps) = eps {
        config.eps = eps;
    }
    config.validate().map_err(config_error)?;
    let run = common.run("validate");
    if dry_run {
        return run.finish(&config, config.seed, true, Vec::new());
    }
    sweep_pipeline(run, &config, "Disk hole at (2.1, 0.1), Neumann")
}

pub fn star(common: &Common) -> Result<RunManifest, CliError> {
    let mut config = SweepConfig::star();
    apply_overrides(&mut config, common);
    config.validate().map_err(config_error)?;
    sweep_pipeline(common.run("star"), &config, "Star hole at (2.1, 0.1), Neumann")
}

/// Parses a JSON config and reports the path of the offending field.
pub fn parse_config<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn sweep(common: &Common, path: &Path) -> Result<RunManifest, CliError> {
    let mut config: SweepConfig = read_config(path)?;
    apply_overrides(&mut config, common);
    config.validate().map_err(config_error)?;
    let title = format!(
        "{} sweep, {:?} hole at ({}, {})",
        match config.bc {
            Bc::Neumann => "Neumann",
            Bc::Dirichlet => "Dirichlet",
        },
        config.hole,
        config.x0[0],
        config.x0[1]
    );
    sweep_pipeline(common.run("sweep"), &config, &title)
}

/// Relative tolerance of the scaled torsion energy at the smallest ε.
pub const TORSION_TOL: f64 = 0.15;
/// Required decrease of `‖U‖²_{L²}/‖U‖²_{H¹}` across the sweep.
pub const TORSION_RATIO_DROP: f64 = 4.0;
pub const PROJECTION_SLOPE: f64 = 2.0;
pub const PROJECTION_SLOPE_TOL: f64 = 0.3;
pub const PROJECTION_LIMIT_TOL: f64 = 0.3;

pub fn torsion(common: &Common, config_path: Option<&Path>) -> Result<RunManifest, CliError> {
    let mut config = match config_path {
        Some(p) => read_config(p)?,
        None => ModeExperimentConfig::validation(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(tol) = common.tol {
        config.tol = tol;
    }
    config.validate().map_err(config_error)?;
    let mut run = common.run("torsion");
    let decay = torsion_decay_experiment(&config).map_err(numerical)?;
    let study = projection_experiment(&config).map_err(numerical)?;
    run.write_json("torsion.json", &decay)?;
    run.write("torsion.csv", &torsion_csv(&decay))?;
    let eps: Vec<f64> = decay.rows.iter().map(|r| r.eps).collect();
    let scaled: Vec<f64> = decay.rows.iter().map(|r| r.scaled_energy).collect();
    run.write("torsion.svg", &scaled_svg("Scaled torsion energy", &eps, &scaled, decay.limit))?;
    run.write_json("projection.json", &study)?;
    run.write("projection.csv", &projection_csv(&study))?;
    let eps: Vec<f64> = study.rows.iter().map(|r| r.eps).collect();
    let scaled: Vec<f64> = study.rows.iter().map(|r| r.scaled).collect();
    run.write("projection.svg", &scaled_svg("Scaled projection distance", &eps, &scaled, study.limit))?;

    println!("{:>8} {:>14} {:>14} {:>14}", "eps", "scaled H1", "L2/H1", "projection");
    for (t, p) in decay.rows.iter().zip(&study.rows) {
        println!("{:>8} {:>14.6} {:>14.6} {:>14.6}", t.eps, t.scaled_energy, t.l2_h1_ratio, p.scaled);
    }
    println!("limit {:.6}", decay.limit);

    let mut checks = vec![Check::gating(
        "torsion limit",
        decay.relative_error_smallest_eps <= TORSION_TOL,
        format!(
            "scaled energy at eps = {} within {:.3} of {:.6}",
            eps.last().copied().unwrap_or(f64::NAN),
            decay.relative_error_smallest_eps,
            decay.limit
        ),
    )];
    if let (Some(first), Some(last)) = (decay.rows.first(), decay.rows.last()) {
        let drop = first.l2_h1_ratio / last.l2_h1_ratio;
        checks.push(Check::gating(
            "torsion L2 share",
            drop >= TORSION_RATIO_DROP,
            format!("L2/H1 ratio falls by a factor {drop:.2} from eps = {} to {}", first.eps, last.eps),
        ));
    }
    if let Some(s) = study.loglog_slope {
        checks.push(Check::info(
            "projection slope",
            (s - PROJECTION_SLOPE).abs() <= PROJECTION_SLOPE_TOL,
            format!("log-log slope {s:.3}"),
        ));
    }
    if let Some(l) = study.extrapolated_limit {
        let err = (l - study.limit).abs() / study.limit;
        checks.push(Check::info(
            "projection limit",
            err <= PROJECTION_LIMIT_TOL,
            format!("extrapolated {l:.6} vs {:.6} (relative error {err:.3})", study.limit),
        ));
    }
    print_checks(&checks);
    run.finish(&config, config.seed, false, checks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub seed: u64,
    pub count: usize,
    pub dim_max: usize,
}

pub fn cdv_fuzz(common: &Common, count: usize, dim_max: usize) -> Result<RunManifest, CliError> {
    common.warn_unused_tol("cdv-fuzz");
    if count == 0 || dim_max < 3 {
        return Err(CliError::Config("count: must be positive; dim_max: must be at least 3".into()));
    }
    let config = FuzzConfig {
        seed: common.seed.unwrap_or(42),
        count,
        dim_max,
    };
    let mut run = common.run("cdv-fuzz");
    let report = fuzz(config.seed, config.count, config.dim_max);
    run.write_json("cdv_fuzz.json", &report)?;
    let checks = vec![Check::gating(
        "both bounds",
        report.failed == 0,
        format!(
            "{} of {} instances pass; worst ratios {:.3} (eigenvalue), {:.3} (projection)",
            report.passed, report.count, report.worst_eigenvalue_ratio, report.worst_projection_ratio
        ),
    )];
    print_checks(&checks);
    run.finish(&config, config.seed, false, checks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predict3dConfig {
    pub domain: DomainSpec,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub lambda_range: [f64; 2],
    /// Distance of the drawn centre from the faces of the box.
    pub margin: f64,
}

impl Default for Predict3dConfig {
    fn default() -> Self {
        Predict3dConfig {
            domain: DomainSpec::reference_box(),
            seed: 0x05ee_d1ab,
            eps: (0..=10).map(|i| 0.05 * i as f64).collect(),
            lambda_range: [3.4, 4.1],
            margin: 0.6,
        }
    }
}

pub const PREDICT3D_CSV_HEADER: &str = "lambda,multiplicity,branch,gamma,eps,lambda_predicted";

fn predict3d_csv(p: &BoxPrediction) -> String {
    let mut s = format!("{PREDICT3D_CSV_HEADER}\n");
    for c in &p.clusters {
        for (j, e) in p.eps.iter().enumerate() {
            for (i, g) in c.gamma.iter().enumerate() {
                // branches are ascending while γ is descending
                let lam = c.branches[j][i];
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    fmt_f64(c.lambda),
                    c.gamma.len(),
                    i + 1,
                    fmt_f64(*g),
                    fmt_f64(*e),
                    fmt_f64(lam)
                );
            }
        }
    }
    s
}

pub fn predict3d(common: &Common, eps: Option<Vec<f64>>) -> Result<RunManifest, CliError> {
    common.warn_unused_tol("predict3d");
    let mut config = Predict3dConfig::default();
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(eps) = eps {
        config.eps = eps;
    }
    let mut run = common.run("predict3d");
    let p = predict_box(&config.domain, config.seed, &config.eps, config.lambda_range, config.margin).map_err(config_error)?;
    run.write_json("predict3d.json", &p)?;
    run.write("predict3d.csv", &predict3d_csv(&p))?;
    println!("{} at x0 = {:?}", p.label, p.x0);
    let checks: Vec<Check> = p
        .clusters
        .iter()
        .map(|c| {
            let g: Vec<String> = c.gamma.iter().map(|g| format!("{g:.6}")).collect();
            Check::gating(
                format!("lambda {:.4} (m = {}) splits", c.lambda, c.gamma.len()),
                c.distinct,
                format!("gamma = [{}], smallest gap {:.3e}", g.join(", "), c.min_gap),
            )
        })
        .collect();
    print_checks(&checks);
    run.finish(&config, config.seed, false, checks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMapConfig {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub cluster_n: usize,
    pub nx: usize,
    pub ny: usize,
    pub x0: Point,
}

pub const GAMMA_FRACTION_MAX: f64 = 0.05;

#[derive(Serialize)]
struct GammaSummary<'a> {
    nx: usize,
    ny: usize,
    bounds: [f64; 4],
    zero_tol: f64,
    sign_change_cells: usize,
    fraction: f64,
    arc_length: f64,
    x0: Point,
    x0_clearance: &'a PointClearance,
}

pub fn gamma_map_cmd(common: &Common, nx: usize, ny: usize) -> Result<RunManifest, CliError> {
    common.warn_unused_tol("gamma-map");
    if nx == 0 || ny == 0 {
        return Err(CliError::Config("nx, ny: must be positive".into()));
    }
    let config = GammaMapConfig {
        schema_version: SCHEMA_VERSION,
        domain: DomainSpec::reference_rectangle(),
        cluster_n: 3,
        nx,
        ny,
        x0: [2.1, 0.1],
    };
    let mut run = common.run("gamma-map");
    let basis = EigenspaceBasis::cluster_at(&config.domain, Bc::Neumann, config.cluster_n).map_err(config_error)?;
    let map: GammaMap = gamma_map(&basis, nx, ny).map_err(numerical)?;
    let value = {
        let g = speclab::asymptotics::g_functions(&basis, &config.x0, 2).map_err(numerical)?;
        g[0] - g[1]
    };
    let clearance = map.clearance(config.x0, value).map_err(numerical)?;
    run.write("gamma_map.csv", &map.to_csv())?;
    run.write("gamma_map.svg", &map.to_svg(&[config.x0]))?;
    run.write_json("gamma_map.json", &GammaSummary {
        nx,
        ny,
        bounds: map.bounds,
        zero_tol: map.zero_tol,
        sign_change_cells: map.sign_change_cells.len(),
        fraction: map.fraction,
        arc_length: map.arc_length,
        x0: config.x0,
        x0_clearance: &clearance,
    })?;
    let checks = vec![
        Check::gating(
            "sign-change fraction",
            map.fraction <= GAMMA_FRACTION_MAX,
            format!(
                "{} of {} cells ({:.4}); contour length {:.4}",
                map.sign_change_cells.len(),
                nx * ny,
                map.fraction,
                map.arc_length
            ),
        ),
        Check::gating(
            "x0 off the set",
            clearance.clear,
            format!(
                "|g1 - g2|(x0) = {:.3e}, local variation {:.3e}, cell flagged: {}",
                clearance.value.abs(),
                clearance.local_variation,
                clearance.cell_flagged
            ),
        ),
    ];
    print_checks(&checks);
    run.finish(&config, common.seed.unwrap_or(0), false, checks)
}
