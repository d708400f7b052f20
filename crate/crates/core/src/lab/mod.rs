//! End-to-end experiments: ε-sweeps on matched meshes, slope fits against
//! the predicted coefficients, torsion and projection studies, and the
//! prediction-only three-dimensional box.

mod box3d;
mod fit;
mod mode;
mod report;
mod sweep;

pub use box3d::{predict_box, BoxClusterPrediction, BoxPrediction, BALL_HOLE_LABEL, COINCIDENCE_TOL};
pub use fit::{
    d_table, dirichlet_structure, eps_scale, fit_line_weighted, fit_slopes, splitting_report, BranchFit, ClusterFit,
    DRow, DirichletStructure, LineFit, SplitVerdict, SplittingReport,
};
pub use mode::{
    projection_distance, projection_experiment, torsion_decay_experiment, ModeExperimentConfig, ProjectionRow,
    ProjectionStudy, TorsionDecay, TorsionRow,
};
pub use report::{
    projection_csv, scaled_svg, sweep_csv, sweep_svg, torsion_csv, PROJECTION_CSV_HEADER, SWEEP_CSV_HEADER,
    TORSION_CSV_HEADER,
};
pub use sweep::{
    cluster_info, run_sweep, solve_mesh, solve_pair, ClusterInfo, EpsRecord, PencilSolve, SweepConfig, SweepResult,
    SCHEMA_VERSION,
};
