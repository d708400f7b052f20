//! P1 finite elements: assembly, boundary flux loads, the torsion solve and
//! Dirichlet elimination.

mod assemble;
mod dirichlet;
mod sparse;
mod torsion;

pub use assemble::{assemble, assemble_hole_flux_load, element_matrices};
pub use dirichlet::{apply_dirichlet, DirichletSystem};
pub use sparse::{dot, norm2, CsrMatrix};
pub use torsion::{pcg, solve_torsion, TorsionSolution};
