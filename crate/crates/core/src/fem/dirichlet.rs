use crate::error::{Error, Result};
use crate::fem::CsrMatrix;
use crate::geometry::{BoundaryTag, Mesh};

/// Interior-DOF subsystem after eliminating constrained vertices.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    /// `free[r]` is the mesh vertex of reduced DOF `r`.
    pub free: Vec<usize>,
}

impl DirichletSystem {
    /// Extends a reduced vector by zero on the constrained vertices.
    pub fn expand(&self, x: &[f64], n_vertices: usize) -> Vec<f64> {
        let mut full = vec![0.0; n_vertices];
        for (r, &v) in self.free.iter().enumerate() {
            full[v] = x[r];
        }
        full
    }
}

/// Removes the rows and columns of every vertex on an edge carrying one of `tags`.
pub fn apply_dirichlet(k: &CsrMatrix, m: &CsrMatrix, mesh: &Mesh, tags: &[BoundaryTag]) -> Result<DirichletSystem> {
    let n = mesh.vertices.len();
    if k.n != n || m.n != n {
        return Err(Error::InvalidInput("matrices do not match the mesh".into()));
    }
    let mut fixed = vec![false; n];
    for e in &mesh.boundary_edges {
        if tags.contains(&e.tag) {
            fixed[e.v[0]] = true;
            fixed[e.v[1]] = true;
        }
    }
    let free: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    if free.is_empty() {
        return Err(Error::InvalidInput("every degree of freedom is constrained".into()));
    }
    Ok(DirichletSystem {
        k: k.submatrix(&free),
        m: m.submatrix(&free),
        free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::geometry::{build_rectangle_mesh, DomainSpec};

    #[test]
    fn no_constraint_is_identity_map() {
        let mesh = build_rectangle_mesh(&DomainSpec::reference_rectangle(), 1.0).unwrap();
        let (k, m) = assemble(&mesh).unwrap();
        let d = apply_dirichlet(&k, &m, &mesh, &[]).unwrap();
        assert_eq!(d.free, (0..mesh.vertices.len()).collect::<Vec<_>>());
        assert_eq!(d.k, k);
    }

    #[test]
    fn outer_constraint_keeps_interior() {
        let mesh = build_rectangle_mesh(&DomainSpec::reference_rectangle(), 0.5).unwrap();
        let (k, m) = assemble(&mesh).unwrap();
        let d = apply_dirichlet(&k, &m, &mesh, &[BoundaryTag::Outer]).unwrap();
        let interior = mesh
            .vertices
            .iter()
            .filter(|p| p[0].abs() < 4.0 && p[1].abs() < 2.0)
            .count();
        assert_eq!(d.free.len(), interior);
        assert_eq!(d.k.n, interior);
        let x: Vec<f64> = (0..interior).map(|i| i as f64).collect();
        let full = d.expand(&x, mesh.vertices.len());
        assert_eq!(full.iter().filter(|&&v| v != 0.0).count(), interior - 1);
    }
}
