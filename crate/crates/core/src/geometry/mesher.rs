//! Graded lattice meshing of the rectangle with a polygonal hole.
//!
//! Points come from nested lattices: level `l` has spacing `(sx, sy) / 2^l`
//! on the same origin, so every level contains all coarser ones. A lattice
//! point whose coarsest level is `l` is kept iff the refinement required at
//! its distance from the hole is at least `l`. The hole polygon is sampled at
//! the finest spacing and lattice points too close to it are dropped.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::delaunay::delaunay_triangulate;
use super::hole::{distance_to_polygon, is_simple_polygon, polygon_area, polygonize_hole, winding_number};
use super::mesh::{min_angle_deg, signed_area, BoundaryEdge, BoundaryTag, Mesh};
use super::{DomainSpec, HoleShape, HoleSpec, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MesherOptions {
    /// Global maximal edge length.
    pub h_target: f64,
    /// Edge target near the hole is `min(h_target, hole_resolution * eps)`.
    pub hole_resolution: f64,
    /// Width of the finest band around the hole, in units of eps.
    pub band_width: f64,
    /// Width of each coarsening transition, in cells of the coarser level.
    pub transition_cells: f64,
    /// Lattice points closer than this fraction of the local spacing to the
    /// hole boundary are discarded.
    pub boundary_clearance: f64,
    pub smoothing_passes: usize,
    pub min_angle_deg: f64,
}

impl MesherOptions {
    pub fn new(h_target: f64) -> Self {
        MesherOptions {
            h_target,
            hole_resolution: 0.125,
            band_width: 2.0,
            transition_cells: 4.0,
            boundary_clearance: 0.6,
            smoothing_passes: 3,
            min_angle_deg: 20.0,
        }
    }
}

/// Perforated and filled meshes sharing every vertex and triangle outside
/// the hole. Filled vertices are numbered so that the perforated ones come
/// first; `shared_vertex_map[i]` is the filled index of perforated vertex `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedMeshPair {
    pub perforated: Mesh,
    pub filled: Mesh,
    pub shared_vertex_map: Vec<usize>,
    /// Filled-mesh triangles lying inside the hole.
    pub hole_triangles: Vec<usize>,
    pub hole_polygon: Vec<Point>,
}

struct Lattice {
    x: (f64, f64),
    y: (f64, f64),
    nx: usize,
    ny: usize,
}

impl Lattice {
    fn new(domain: &DomainSpec, h: f64) -> Result<Self> {
        domain.validate()?;
        let DomainSpec::Rectangle2D {
            x_min,
            x_max,
            y_min,
            y_max,
        } = *domain
        else {
            return Err(Error::InvalidInput("meshing requires a 2D rectangle".into()));
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("h_target must be positive, got {h}")));
        }
        // square-ish cells whose diagonal is at most h
        let cell = h / std::f64::consts::SQRT_2;
        let nx = ((x_max - x_min) / cell).ceil().max(1.0) as usize;
        let ny = ((y_max - y_min) / cell).ceil().max(1.0) as usize;
        if nx.saturating_mul(ny) > 50_000_000 {
            return Err(Error::InvalidInput(format!("h_target {h} is too small for this domain")));
        }
        Ok(Lattice {
            x: (x_min, x_max),
            y: (y_min, y_max),
            nx,
            ny,
        })
    }

    fn sx(&self) -> f64 {
        (self.x.1 - self.x.0) / self.nx as f64
    }

    fn sy(&self) -> f64 {
        (self.y.1 - self.y.0) / self.ny as f64
    }

    fn coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
        if i == n {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / n as f64)
        }
    }

    /// Point `(i, j)` of the level-`l` lattice.
    fn point(&self, l: u32, i: usize, j: usize) -> Point {
        let (nx, ny) = (self.nx << l, self.ny << l);
        [Self::coord(self.x.0, self.x.1, i, nx), Self::coord(self.y.0, self.y.1, j, ny)]
    }

    fn on_outer_boundary(&self, p: Point) -> bool {
        p[0] == self.x.0 || p[0] == self.x.1 || p[1] == self.y.0 || p[1] == self.y.1
    }
}

/// Uniform lattice triangulation of a rectangle with maximal edge `h_target`.
pub fn build_rectangle_mesh(domain: &DomainSpec, h_target: f64) -> Result<Mesh> {
    let lat = Lattice::new(domain, h_target)?;
    let mut pts = Vec::with_capacity((lat.nx + 1) * (lat.ny + 1));
    for j in 0..=lat.ny {
        for i in 0..=lat.nx {
            pts.push(lat.point(0, i, j));
        }
    }
    let tri = delaunay_triangulate(&pts)?;
    let mesh = Mesh::from_triangles(tri.points, tri.triangles, |_, _| BoundaryTag::Outer)?;
    check_quality(&mesh, 20.0, 1)?;
    Ok(mesh)
}

fn check_quality(mesh: &Mesh, min_angle: f64, euler: i64) -> Result<()> {
    let q = mesh.h_stats;
    if q.min_angle_deg < min_angle {
        return Err(Error::MeshQuality {
            min_angle_deg: q.min_angle_deg,
            required_deg: min_angle,
            report: format!("{q:?}"),
        });
    }
    if q.euler_characteristic != euler {
        return Err(Error::Mesh(format!(
            "Euler characteristic {} (expected {euler})",
            q.euler_characteristic
        )));
    }
    Ok(())
}

/// Builds the matched pair with default options.
pub fn build_matched_meshes(domain: &DomainSpec, hole: &HoleSpec, h_target: f64) -> Result<MatchedMeshPair> {
    build_matched_meshes_with(domain, hole, &MesherOptions::new(h_target))
}

pub fn build_matched_meshes_with(domain: &DomainSpec, hole: &HoleSpec, opts: &MesherOptions) -> Result<MatchedMeshPair> {
    let lat = Lattice::new(domain, opts.h_target)?;
    hole.validate_in(domain)?;
    let eps = hole.scale;

    // finest level: lattice diagonal at most min(h, resolution * eps)
    let diag0 = lat.sx().hypot(lat.sy());
    let target = opts.h_target.min(opts.hole_resolution * eps);
    let mut levels = 0u32;
    while diag0 / f64::from(1u32 << levels) > target * (1.0 + 1e-12) {
        levels += 1;
        if levels > 20 {
            return Err(Error::InvalidInput("hole is too small relative to h_target".into()));
        }
    }
    let fine = lat.sx().min(lat.sy()) / f64::from(1u32 << levels);

    let polygon = sample_hole(domain, hole, fine)?;
    if !is_simple_polygon(&polygon) {
        return Err(Error::Mesh("hole polygon is not simple".into()));
    }

    // outer radius of each refinement band, indexed by level
    let coarse = lat.sx().max(lat.sy());
    let mut reach = vec![0.0; levels as usize + 1];
    if levels > 0 {
        reach[levels as usize] = opts.band_width * eps;
        for l in (1..levels as usize).rev() {
            reach[l] = reach[l + 1] + opts.transition_cells * coarse / f64::from(1u32 << l);
        }
    }
    let required = |d: f64| -> u32 { (1..=levels).rev().find(|&l| d <= reach[l as usize]).unwrap_or(0) };

    let (mut bl, mut bh) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &polygon {
        for d in 0..2 {
            bl[d] = bl[d].min(p[d]);
            bh[d] = bh[d].max(p[d]);
        }
    }
    let near_box = |p: Point, r: f64| p[0] >= bl[0] - r && p[0] <= bh[0] + r && p[1] >= bl[1] - r && p[1] <= bh[1] + r;
    let clearance = opts.boundary_clearance * fine;
    let keep_clear = |p: Point| !near_box(p, clearance) || distance_to_polygon(&polygon, p) >= clearance;

    let mut points: Vec<Point> = Vec::new();
    for j in 0..=lat.ny {
        for i in 0..=lat.nx {
            let p = lat.point(0, i, j);
            if keep_clear(p) {
                points.push(p);
            }
        }
    }
    for l in 1..=levels {
        let r = reach[l as usize];
        let (sx, sy) = (lat.sx() / f64::from(1u32 << l), lat.sy() / f64::from(1u32 << l));
        let (nx, ny) = (lat.nx << l, lat.ny << l);
        let i0 = (((bl[0] - r - lat.x.0) / sx).floor().max(0.0)) as usize;
        let i1 = ((((bh[0] + r - lat.x.0) / sx).ceil()) as usize).min(nx);
        let j0 = (((bl[1] - r - lat.y.0) / sy).floor().max(0.0)) as usize;
        let j1 = ((((bh[1] + r - lat.y.0) / sy).ceil()) as usize).min(ny);
        for j in j0..=j1 {
            for i in i0..=i1 {
                if i % 2 == 0 && j % 2 == 0 {
                    continue;
                }
                let p = lat.point(l, i, j);
                if required(distance_to_polygon(&polygon, p)) >= l && keep_clear(p) {
                    points.push(p);
                }
            }
        }
    }

    let mut hole_poly = polygon.clone();
    let (tri, hole_poly_start) = triangulate_with_repair(&mut points, &mut hole_poly, &lat, opts.h_target)?;
    let mut verts = tri.points;
    let triangles = tri.triangles;
    let n_hole = hole_poly.len();
    let is_poly_vertex = |v: usize| v >= hole_poly_start && v < hole_poly_start + n_hole;

    let inside: Vec<bool> = triangles
        .iter()
        .map(|t| {
            let c = [
                (verts[t[0]][0] + verts[t[1]][0] + verts[t[2]][0]) / 3.0,
                (verts[t[0]][1] + verts[t[1]][1] + verts[t[2]][1]) / 3.0,
            ];
            winding_number(&hole_poly, c) != 0
        })
        .collect();
    let hole_area: f64 = triangles
        .iter()
        .zip(&inside)
        .filter(|(_, &h)| h)
        .map(|(t, _)| signed_area(verts[t[0]], verts[t[1]], verts[t[2]]))
        .sum();
    let poly_area = polygon_area(&hole_poly);
    if (hole_area - poly_area).abs() > 1e-9 * poly_area {
        return Err(Error::Mesh(format!(
            "hole triangles cover area {hole_area}, polygon area is {poly_area}"
        )));
    }

    let pinned: Vec<bool> = (0..verts.len())
        .map(|v| is_poly_vertex(v) || lat.on_outer_boundary(verts[v]))
        .collect();
    smooth(&mut verts, &triangles, &pinned, opts.smoothing_passes);

    // renumber: vertices used by perforated triangles first
    let mut used_outside = vec![false; verts.len()];
    for (t, &h) in triangles.iter().zip(&inside) {
        if !h {
            for &v in t {
                used_outside[v] = true;
            }
        }
    }
    let mut new_index = vec![usize::MAX; verts.len()];
    let mut order = Vec::with_capacity(verts.len());
    for pass in [true, false] {
        for v in 0..verts.len() {
            if used_outside[v] == pass {
                new_index[v] = order.len();
                order.push(v);
            }
        }
    }
    let n_perf = used_outside.iter().filter(|&&u| u).count();
    let filled_vertices: Vec<Point> = order.iter().map(|&v| verts[v]).collect();
    let remap = |t: &[usize; 3]| [new_index[t[0]], new_index[t[1]], new_index[t[2]]];
    let mut filled_tris: Vec<[usize; 3]> = triangles.iter().zip(&inside).filter(|(_, &h)| !h).map(|(t, _)| remap(t)).collect();
    let n_perf_tris = filled_tris.len();
    filled_tris.extend(triangles.iter().zip(&inside).filter(|(_, &h)| h).map(|(t, _)| remap(t)));

    let poly_set: HashSet<usize> = (hole_poly_start..hole_poly_start + n_hole).map(|v| new_index[v]).collect();
    let perf_tris = filled_tris[..n_perf_tris].to_vec();
    let perf_vertices = filled_vertices[..n_perf].to_vec();
    let perforated = mesh_from_parts(perf_vertices, perf_tris, &poly_set)?;
    let filled = Mesh::from_triangles(filled_vertices, filled_tris, |_, _| BoundaryTag::Outer)?;

    let min_angle = opts.min_angle_deg;
    check_quality(&filled, min_angle, 1)?;
    check_quality(&perforated, min_angle, 0)?;
    let hole_loops = perforated
        .boundary_loops()?
        .into_iter()
        .filter(|(t, _)| *t == BoundaryTag::Hole)
        .count();
    if hole_loops != 1 {
        return Err(Error::Mesh(format!("expected one hole loop, found {hole_loops}")));
    }

    Ok(MatchedMeshPair {
        perforated,
        filled,
        shared_vertex_map: (0..n_perf).collect(),
        hole_triangles: (n_perf_tris..n_perf_tris + (triangles.len() - n_perf_tris)).collect(),
        hole_polygon: hole_poly,
    })
}

fn mesh_from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, poly: &HashSet<usize>) -> Result<Mesh> {
    let tagged = Mesh::from_triangles(vertices, triangles, |_, _| BoundaryTag::Outer)?;
    let edges: Vec<BoundaryEdge> = tagged
        .boundary_edges
        .iter()
        .map(|e| BoundaryEdge {
            v: e.v,
            tag: if poly.contains(&e.v[0]) && poly.contains(&e.v[1]) {
                BoundaryTag::Hole
            } else {
                BoundaryTag::Outer
            },
        })
        .collect();
    let mut edges = edges;
    edges.sort_unstable_by_key(|e| (e.tag == BoundaryTag::Hole, e.v));
    Mesh::new(tagged.vertices, tagged.triangles, edges)
}

/// Hole polygon with consecutive vertices at most about `spacing` apart.
fn sample_hole(domain: &DomainSpec, hole: &HoleSpec, spacing: f64) -> Result<Vec<Point>> {
    match hole.shape {
        HoleShape::Disk => {
            let k = ((2.0 * std::f64::consts::PI * hole.scale / spacing).ceil() as usize).max(8);
            let arc_tol = 1.0 - (std::f64::consts::PI / k as f64).cos();
            polygonize_hole(domain, hole, arc_tol)
        }
        HoleShape::Star { .. } => {
            let corners = polygonize_hole(domain, hole, 1.0)?;
            let n = corners.len();
            let mut out = Vec::new();
            for i in 0..n {
                let (a, b) = (corners[i], corners[(i + 1) % n]);
                let pieces = ((b[0] - a[0]).hypot(b[1] - a[1]) / spacing).ceil().max(1.0) as usize;
                for s in 0..pieces {
                    let t = s as f64 / pieces as f64;
                    out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
            Ok(out)
        }
    }
}

/// Triangulates lattice points plus the hole polygon, splitting polygon edges
/// that are missing from the triangulation until all are present. Returns
/// the triangulation and the index of the first polygon vertex.
fn triangulate_with_repair(
    lattice: &mut [Point],
    polygon: &mut Vec<Point>,
    lat: &Lattice,
    h: f64,
) -> Result<(super::Triangulation, usize)> {
    let start = lattice.len();
    for _ in 0..8 {
        let mut pts = lattice.to_vec();
        pts.extend_from_slice(polygon);
        let tri = match delaunay_triangulate(&pts) {
            Ok(t) => t,
            Err(_) => {
                // deterministic 1e-12 h jitter of interior points, one retry
                for (i, p) in pts.iter_mut().enumerate() {
                    if !lat.on_outer_boundary(*p) {
                        let s = ((i as f64) * 0.618_033_988_749_895).fract() - 0.5;
                        p[0] += 1e-12 * h * s;
                        p[1] -= 1e-12 * h * s;
                    }
                }
                let t = delaunay_triangulate(&pts)?;
                lattice.copy_from_slice(&pts[..start]);
                polygon.copy_from_slice(&pts[start..]);
                t
            }
        };
        let mut edges: HashSet<(usize, usize)> = HashSet::with_capacity(tri.triangles.len() * 3);
        for t in &tri.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let n = polygon.len();
        let missing: Vec<usize> = (0..n)
            .filter(|&i| {
                let (a, b) = (start + i, start + (i + 1) % n);
                !edges.contains(&(a.min(b), a.max(b)))
            })
            .collect();
        if missing.is_empty() {
            return Ok((tri, start));
        }
        let mut refined = Vec::with_capacity(n + missing.len());
        let mut m = missing.iter().peekable();
        for i in 0..n {
            refined.push(polygon[i]);
            if m.peek() == Some(&&i) {
                m.next();
                let (a, b) = (polygon[i], polygon[(i + 1) % n]);
                refined.push([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
            }
        }
        *polygon = refined;
    }
    Err(Error::Mesh("hole boundary could not be recovered in the triangulation".into()))
}

/// Gauss–Seidel Laplacian smoothing of the free vertices. A move is kept only
/// if every incident triangle stays positive and the smallest incident angle
/// does not decrease.
fn smooth(verts: &mut [Point], triangles: &[[usize; 3]], pinned: &[bool], passes: usize) {
    let nv = verts.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (v, ts) in incident.iter().enumerate() {
        let mut ns: Vec<usize> = ts.iter().flat_map(|&t| triangles[t]).filter(|&w| w != v).collect();
        ns.sort_unstable();
        ns.dedup();
        neighbors[v] = ns;
    }
    let local_min = |verts: &[Point], v: usize| -> Option<f64> {
        let mut m = f64::INFINITY;
        for &t in &incident[v] {
            let [a, b, c] = triangles[t];
            if signed_area(verts[a], verts[b], verts[c]) <= 0.0 {
                return None;
            }
            m = m.min(min_angle_deg(verts[a], verts[b], verts[c]));
        }
        Some(m)
    };
    for _ in 0..passes {
        for v in 0..nv {
            if pinned[v] || neighbors[v].is_empty() {
                continue;
            }
            let k = neighbors[v].len() as f64;
            let target = neighbors[v].iter().fold([0.0, 0.0], |acc, &w| [acc[0] + verts[w][0], acc[1] + verts[w][1]]);
            let target = [target[0] / k, target[1] / k];
            let old = verts[v];
            let before = local_min(verts, v).unwrap_or(f64::NEG_INFINITY);
            verts[v] = target;
            match local_min(verts, v) {
                Some(after) if after >= before => {}
                _ => verts[v] = old,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rect() -> DomainSpec {
        DomainSpec::reference_rectangle()
    }

    #[test]
    fn rectangle_mesh_count_and_quality() {
        let h = 0.1;
        let m = build_rectangle_mesh(&rect(), h).unwrap();
        let expect = 2.0 * 32.0 / (h * h);
        let nv = m.vertices.len() as f64;
        assert!((nv - expect).abs() <= 0.2 * expect, "{nv} vs {expect}");
        assert!(m.h_stats.max_edge <= h * (1.0 + 1e-12));
        assert_eq!(m.h_stats.euler_characteristic, 1);
        assert!((m.area() - 32.0).abs() < 1e-12, "{}", m.area() - 32.0);
        assert!(m.delaunay_violations(1e-10).is_empty());
    }

    #[test]
    fn disk_hole_pair_is_consistent() {
        let hole = HoleSpec::new(HoleShape::Disk, [2.1, 0.1], 0.25);
        let pair = build_matched_meshes(&rect(), &hole, 0.1).unwrap();
        let (p, f) = (&pair.perforated, &pair.filled);
        assert!((f.area() - 32.0).abs() < 1e-10);
        let hole_area = f.area() - p.area();
        assert!((hole_area - PI * 0.0625).abs() < 0.01 * PI * 0.0625);
        for (i, &j) in pair.shared_vertex_map.iter().enumerate() {
            assert_eq!(p.vertices[i], f.vertices[j]);
        }
        assert_eq!(&f.triangles[..p.triangles.len()], &p.triangles[..]);
        assert!(p.h_stats.min_angle_deg >= 20.0 && f.h_stats.min_angle_deg >= 20.0);
        assert_eq!(p.h_stats.euler_characteristic, 0);
        let hole_len: f64 = p
            .edges_with_tag(BoundaryTag::Hole)
            .map(|e| {
                let (a, b) = (p.vertices[e.v[0]], p.vertices[e.v[1]]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum();
        assert!((hole_len - 2.0 * PI * 0.25).abs() < 0.01 * 2.0 * PI * 0.25);
        // the hole is resolved at eps / 8
        let fine: f64 = p
            .edges_with_tag(BoundaryTag::Hole)
            .map(|e| {
                let (a, b) = (p.vertices[e.v[0]], p.vertices[e.v[1]]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .fold(0.0, f64::max);
        assert!(fine <= 0.25 / 8.0);
    }

    #[test]
    fn star_hole_pair_is_valid() {
        let shape = HoleShape::Star {
            points: 5,
            inner_ratio: 0.5,
        };
        let hole = HoleSpec::new(shape, [2.1, 0.1], 0.5);
        let pair = build_matched_meshes(&rect(), &hole, 0.1).unwrap();
        assert!(pair.perforated.is_perforated());
        assert!(!pair.filled.is_perforated());
        let poly = polygonize_hole(&rect(), &hole, 1.0).unwrap();
        let hole_area = pair.filled.area() - pair.perforated.area();
        assert!((hole_area - polygon_area(&poly)).abs() < 1e-10);
    }

    #[test]
    fn rejects_hole_outside() {
        let hole = HoleSpec::new(HoleShape::Disk, [3.5, 0.0], 0.6);
        assert!(matches!(build_matched_meshes(&rect(), &hole, 0.1), Err(Error::Clearance { .. })));
        let hole = HoleSpec::new(HoleShape::Disk, [0.0, 0.0], 0.5);
        assert!(build_matched_meshes(&rect(), &hole, -1.0).is_err());
    }

    #[test]
    fn meshing_is_deterministic() {
        let hole = HoleSpec::new(HoleShape::Disk, [2.1, 0.1], 0.3);
        let a = build_matched_meshes(&rect(), &hole, 0.2).unwrap();
        let b = build_matched_meshes(&rect(), &hole, 0.2).unwrap();
        assert_eq!(a.filled.to_text(), b.filled.to_text());
    }
}
