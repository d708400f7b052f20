//! Closed-form side of the theory: analytic spectra of rectangles and
//! boxes, the limit bilinear forms whose eigenvalues give the splitting
//! coefficients, ball torsion and capacity constants, and the map of the
//! set where the coefficients coincide.

mod ball;
mod forms;
mod gamma_map;
mod spectrum;

pub use ball::{
    ball_torsion_energy, ball_torsion_field, ball_torsion_gradient, gauss_legendre, newtonian_capacity_ball, omega,
};
pub use forms::{
    dirichlet_constant, dirichlet_form_from_samples, dirichlet_form_matrix, g_functions, gamma_eigenvalues,
    limit_form_from_samples, neumann_form_from_samples, neumann_form_matrix, predict_branches,
    predict_dirichlet_branches, symmetric_eigenvalues, torsion_tensor_from_energy, FormKind, FormMatrix,
};
pub use gamma_map::{gamma_map, gamma_map_from_fn, GammaMap, PointClearance};
pub use spectrum::{analytic_eigenvalues, analytic_spectrum, Bc, EigenspaceBasis, ModeIndex, SpectralCluster};
