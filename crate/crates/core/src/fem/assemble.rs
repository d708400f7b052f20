use crate::error::{Error, Result};
use crate::fem::CsrMatrix;
use crate::geometry::{BoundaryTag, Mesh, Point};

/// P1 stiffness and mass matrices of a single triangle.
pub fn element_matrices(p: [Point; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3], f64) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    // ∇λ_i = (b_i, c_i) / (2A)
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = p[j][1] - p[k][1];
        c[i] = p[k][0] - p[j][0];
    }
    let mut ke = [[0.0; 3]; 3];
    let mut me = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ke[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
            me[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (ke, me, area)
}

/// Stiffness `K` and mass `M` of the P1 space on `mesh`.
///
/// Triangles are processed in mesh order and duplicates are summed in that
/// order, so the result is reproducible bit for bit.
pub fn assemble(mesh: &Mesh) -> Result<(CsrMatrix, CsrMatrix)> {
    let n = mesh.vertices.len();
    let mut kt = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for (index, t) in mesh.triangles.iter().enumerate() {
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        let (ke, me, area) = element_matrices(p);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { index, area });
        }
        for i in 0..3 {
            for j in 0..3 {
                kt.push((t[i], t[j], ke[i][j]));
                mt.push((t[i], t[j], me[i][j]));
            }
        }
    }
    let k = CsrMatrix::from_triplets(n, &kt, true)?;
    let scale = k.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k = k.pruned(1e-16 * scale);
    let m = CsrMatrix::from_triplets(n, &mt, true)?;
    Ok((k, m))
}

/// `b_i = Σ_e ∫_e ψ_i g ds` over the hole edges, with two-point Gauss
/// quadrature. `g` receives the quadrature point and the unit normal of the
/// hole pointing into the mesh.
pub fn assemble_hole_flux_load(mesh: &Mesh, g: impl Fn(Point, [f64; 2]) -> f64) -> Result<Vec<f64>> {
    let mut b = vec![0.0; mesh.vertices.len()];
    let mut any = false;
    let s = 0.5 / 3f64.sqrt();
    for e in mesh.edges_with_tag(BoundaryTag::Hole) {
        any = true;
        let (pa, pb) = (mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = d[0].hypot(d[1]);
        // the mesh lies to the left of its oriented boundary edges
        let normal = [-d[1] / len, d[0] / len];
        for t in [0.5 - s, 0.5 + s] {
            let q = [pa[0] + t * d[0], pa[1] + t * d[1]];
            let w = 0.5 * len * g(q, normal);
            b[e.v[0]] += (1.0 - t) * w;
            b[e.v[1]] += t * w;
        }
    }
    if !any {
        return Err(Error::InvalidInput("mesh has no hole boundary".into()));
    }
    Ok(b)
}
