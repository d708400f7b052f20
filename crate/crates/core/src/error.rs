use thiserror::Error;

/// Errors produced anywhere in the laboratory pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "hole does not fit inside the domain: eps = {eps}, dist(x0, boundary) = {dist}, \
         eps must stay below {eps_bound} (asymptotic bound eps_0 = {eps0})"
    )]
    Clearance {
        eps: f64,
        dist: f64,
        eps_bound: f64,
        eps0: f64,
    },

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("degenerate triangle #{index} (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("mesh generation failed: {0}")]
    Mesh(String),

    #[error("mesh quality check failed: min angle {min_angle_deg:.2} deg < {required_deg} deg ({report})")]
    MeshQuality {
        min_angle_deg: f64,
        required_deg: f64,
        report: String,
    },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (final relative residual {final_residual:e})")]
    NoConvergence {
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("hypothesis {which} violated: {detail}")]
    Hypothesis { which: &'static str, detail: String },

    #[error("cluster is ambiguous: {0}")]
    AmbiguousCluster(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
