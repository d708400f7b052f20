use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Point;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Outer,
    Hole,
}

impl BoundaryTag {
    fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Outer => "outer",
            BoundaryTag::Hole => "hole",
        }
    }
}

/// A boundary edge oriented so that the mesh lies on its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshQuality {
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub edge_count: usize,
    pub min_edge: f64,
    pub max_edge: f64,
    pub mean_edge: f64,
    pub min_angle_deg: f64,
    pub min_area: f64,
    /// V − E + F.
    pub euler_characteristic: i64,
}

/// Triangulated planar domain with tagged boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub h_stats: MeshQuality,
}

/// Neumaier-compensated summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Smallest interior angle of a triangle, in degrees.
pub(crate) fn min_angle_deg(a: Point, b: Point, c: Point) -> f64 {
    let pts = [a, b, c];
    (0..3)
        .map(|i| {
            let p = pts[i];
            let u = [pts[(i + 1) % 3][0] - p[0], pts[(i + 1) % 3][1] - p[1]];
            let v = [pts[(i + 2) % 3][0] - p[0], pts[(i + 2) % 3][1] - p[1]];
            let cross = u[0] * v[1] - u[1] * v[0];
            let dot = u[0] * v[0] + u[1] * v[1];
            cross.abs().atan2(dot).to_degrees()
        })
        .fold(f64::INFINITY, f64::min)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Edge → incident triangles, in a deterministic (sorted) order.
pub(crate) fn edge_triangles(triangles: &[[usize; 3]]) -> Vec<((usize, usize), Vec<usize>)> {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(triangles.len() * 2);
    for (t, tri) in triangles.iter().enumerate() {
        for e in 0..3 {
            map.entry(edge_key(tri[e], tri[(e + 1) % 3])).or_default().push(t);
        }
    }
    let mut edges: Vec<_> = map.into_iter().collect();
    edges.sort_unstable_by_key(|(k, _)| *k);
    edges
}

/// Computes edge statistics, angles and the Euler characteristic.
pub fn mesh_quality(vertices: &[Point], triangles: &[[usize; 3]]) -> MeshQuality {
    let edges = edge_triangles(triangles);
    let mut min_edge = f64::INFINITY;
    let mut max_edge: f64 = 0.0;
    let mut sum = 0.0;
    for ((a, b), _) in &edges {
        let (p, q) = (vertices[*a], vertices[*b]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        min_edge = min_edge.min(len);
        max_edge = max_edge.max(len);
        sum += len;
    }
    let mut min_angle = f64::INFINITY;
    let mut min_area = f64::INFINITY;
    for t in triangles {
        let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        min_angle = min_angle.min(min_angle_deg(a, b, c));
        min_area = min_area.min(signed_area(a, b, c));
    }
    let mut used = vec![false; vertices.len()];
    for t in triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let nv = used.iter().filter(|&&u| u).count();
    MeshQuality {
        vertex_count: nv,
        triangle_count: triangles.len(),
        edge_count: edges.len(),
        min_edge,
        max_edge,
        mean_edge: if edges.is_empty() { 0.0 } else { sum / edges.len() as f64 },
        min_angle_deg: min_angle,
        min_area,
        euler_characteristic: nv as i64 - edges.len() as i64 + triangles.len() as i64,
    }
}

impl Mesh {
    /// Validates and assembles a mesh from explicit boundary edges.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_edges: Vec<BoundaryEdge>) -> Result<Self> {
        let nv = vertices.len();
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Mesh(format!("triangle #{i} has invalid vertex indices {t:?}")));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: i, area });
            }
        }
        let edges = edge_triangles(&triangles);
        let mut free = 0usize;
        for ((a, b), ts) in &edges {
            if ts.len() > 2 {
                return Err(Error::Mesh(format!("edge ({a},{b}) is shared by {} triangles", ts.len())));
            }
            free += (ts.len() == 1) as usize;
        }
        if free != boundary_edges.len() {
            return Err(Error::Mesh(format!(
                "{} boundary edges given but the triangulation has {free}",
                boundary_edges.len()
            )));
        }
        let lookup: HashMap<(usize, usize), usize> = edges.iter().map(|(k, ts)| (*k, ts.len())).collect();
        for e in &boundary_edges {
            if lookup.get(&edge_key(e.v[0], e.v[1])) != Some(&1) {
                return Err(Error::Mesh(format!("edge {:?} is not a boundary edge", e.v)));
            }
        }
        let h_stats = mesh_quality(&vertices, &triangles);
        let mesh = Mesh {
            vertices,
            triangles,
            boundary_edges,
            h_stats,
        };
        mesh.boundary_loops()?;
        Ok(mesh)
    }

    /// Builds the boundary from the free edges; `tag` classifies each one.
    pub fn from_triangles(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tag: impl Fn(Point, Point) -> BoundaryTag,
    ) -> Result<Self> {
        let mut boundary = Vec::new();
        // keep the triangle's own orientation so the domain is on the left
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &triangles {
            for e in 0..3 {
                *count.entry(edge_key(t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        for t in &triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                if count[&edge_key(a, b)] == 1 {
                    boundary.push(BoundaryEdge {
                        v: [a, b],
                        tag: tag(vertices[a], vertices[b]),
                    });
                }
            }
        }
        boundary.sort_unstable_by_key(|e| (e.tag == BoundaryTag::Hole, e.v));
        Mesh::new(vertices, triangles, boundary)
    }

    pub fn is_perforated(&self) -> bool {
        self.boundary_edges.iter().any(|e| e.tag == BoundaryTag::Hole)
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let tri = self.triangles[t];
        signed_area(self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]])
    }

    pub fn area(&self) -> f64 {
        compensated_sum((0..self.triangles.len()).map(|t| self.triangle_area(t)))
    }

    /// Closed boundary loops as vertex sequences, each with its tag. Fails if
    /// the boundary is not a disjoint union of simple closed loops.
    pub fn boundary_loops(&self) -> Result<Vec<(BoundaryTag, Vec<usize>)>> {
        let mut next: HashMap<usize, (usize, BoundaryTag)> = HashMap::new();
        for e in &self.boundary_edges {
            if next.insert(e.v[0], (e.v[1], e.tag)).is_some() {
                return Err(Error::Mesh(format!("boundary vertex {} starts two edges", e.v[0])));
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut visited: HashMap<usize, bool> = HashMap::new();
        let mut loops = Vec::new();
        for s in starts {
            if visited.contains_key(&s) {
                continue;
            }
            let tag = next[&s].1;
            let mut lp = vec![s];
            visited.insert(s, true);
            let mut v = next[&s].0;
            while v != s {
                let Some(&(w, t)) = next.get(&v) else {
                    return Err(Error::Mesh(format!("boundary is open at vertex {v}")));
                };
                if t != tag {
                    return Err(Error::Mesh(format!("boundary loop through vertex {v} mixes tags")));
                }
                if visited.insert(v, true).is_some() {
                    return Err(Error::Mesh(format!("boundary loop revisits vertex {v}")));
                }
                lp.push(v);
                v = w;
            }
            loops.push((tag, lp));
        }
        Ok(loops)
    }

    /// Interior edges whose opposite vertex lies strictly inside the
    /// neighbouring circumcircle by more than a relative `tol`.
    pub fn delaunay_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for ((a, b), ts) in edge_triangles(&self.triangles) {
            if ts.len() != 2 {
                continue;
            }
            for (s, o) in [(ts[0], ts[1]), (ts[1], ts[0])] {
                let tri = self.triangles[s];
                let opp = *self.triangles[o].iter().find(|&&v| v != a && v != b).unwrap();
                let (p, q, r) = (self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]);
                let (c, rad) = circumcircle(p, q, r);
                let d = self.vertices[opp];
                if (d[0] - c[0]).hypot(d[1] - c[1]) < rad * (1.0 - tol) {
                    out.push((s, o));
                }
            }
        }
        out
    }

    /// Plain-text serialization (`nv nt nb`, vertices, triangles, tagged edges).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.vertices.len(), self.triangles.len(), self.boundary_edges.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.v[0], e.v[1], e.tag.as_str());
        }
        s
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next_line = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Mesh(format!("unexpected end of file reading {what}")))
        };
        let bad = |what: &str, line: &str| Error::Mesh(format!("malformed {what} line: {line:?}"));
        let header = next_line("header")?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("header", &header)))
            .collect::<Result<_>>()?;
        let [nv, nt, nb] = counts[..] else {
            return Err(bad("header", &header));
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = next_line("vertex")?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("vertex", &l)))
                .collect::<Result<_>>()?;
            let [x, y] = v[..] else { return Err(bad("vertex", &l)) };
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = next_line("triangle")?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("triangle", &l)))
                .collect::<Result<_>>()?;
            let [i, j, k] = v[..] else { return Err(bad("triangle", &l)) };
            triangles.push([i, j, k]);
        }
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let l = next_line("boundary")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            let [i, j, tag] = parts[..] else { return Err(bad("boundary", &l)) };
            let tag = match tag {
                "outer" => BoundaryTag::Outer,
                "hole" => BoundaryTag::Hole,
                _ => return Err(bad("boundary", &l)),
            };
            boundary.push(BoundaryEdge {
                v: [i.parse().map_err(|_| bad("boundary", &l))?, j.parse().map_err(|_| bad("boundary", &l))?],
                tag,
            });
        }
        Mesh::new(vertices, triangles, boundary)
    }
}

pub(crate) fn circumcircle(a: Point, b: Point, c: Point) -> (Point, f64) {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ([a[0] + ux, a[1] + uy], ux.hypot(uy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let t = vec![[0, 1, 2], [0, 2, 3]];
        Mesh::from_triangles(v, t, |_, _| BoundaryTag::Outer).unwrap()
    }

    #[test]
    fn single_triangle_stats() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        let m = Mesh::from_triangles(v, vec![[0, 1, 2]], |_, _| BoundaryTag::Outer).unwrap();
        let q = m.h_stats;
        assert!((q.min_edge - q.max_edge).abs() < 1e-15);
        assert_eq!(q.euler_characteristic, 1);
        assert!((q.min_angle_deg - 60.0).abs() < 1e-12);
        assert_eq!(m.boundary_loops().unwrap().len(), 1);
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let v = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        match Mesh::from_triangles(v, vec![[0, 1, 2]], |_, _| BoundaryTag::Outer) {
            Err(Error::DegenerateTriangle { index: 0, area }) => assert!(area < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annulus_has_zero_euler_characteristic() {
        // square ring made of 8 triangles around a unit hole
        let v = vec![
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [0.0, 3.0],
            [1.0, 1.0],
            [2.0, 1.0],
            [2.0, 2.0],
            [1.0, 2.0],
        ];
        let t = vec![
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        let m = Mesh::from_triangles(v, t, |a, _| {
            if a[0] > 0.5 && a[0] < 2.5 && a[1] > 0.5 && a[1] < 2.5 {
                BoundaryTag::Hole
            } else {
                BoundaryTag::Outer
            }
        })
        .unwrap();
        assert_eq!(m.h_stats.euler_characteristic, 0);
        assert!(m.is_perforated());
        let loops = m.boundary_loops().unwrap();
        assert_eq!(loops.len(), 2);
        assert!((m.area() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut m = unit_square();
        m.vertices[2] = [1.0, 1.0 + 1e-16 * 3.0];
        m.vertices[1] = [0.1 + 0.2, 0.0];
        let m = Mesh::new(m.vertices, m.triangles, m.boundary_edges).unwrap();
        let text = m.to_text();
        let back = Mesh::read_text(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(text.starts_with("4 2 4\n"));
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(Mesh::read_text("3 1\n".as_bytes()).is_err());
        assert!(Mesh::read_text("3 1 3\n0 0\n1 0\n".as_bytes()).is_err());
    }

    #[test]
    fn delaunay_violation_detected() {
        // thin quad split along its short diagonal is not Delaunay
        let v = vec![[0.0, 0.0], [2.0, -0.1], [4.0, 0.0], [2.0, 0.1]];
        let bad = Mesh::from_triangles(v.clone(), vec![[0, 1, 2], [0, 2, 3]], |_, _| BoundaryTag::Outer).unwrap();
        assert!(!bad.delaunay_violations(1e-10).is_empty());
        let good = Mesh::from_triangles(v, vec![[0, 1, 3], [1, 2, 3]], |_, _| BoundaryTag::Outer).unwrap();
        assert!(good.delaunay_violations(1e-10).is_empty());
    }
}
