use std::f64::consts::PI;

use super::{DomainSpec, HoleShape, HoleSpec, Point};
use crate::error::Result;

/// Polygonal approximation of the hole boundary, counter-clockwise.
///
/// A disk becomes the regular polygon with the fewest vertices (at least four)
/// whose chord sagitta does not exceed `arc_tol * eps`. A star with `p` points
/// becomes its exact `2p`-gon with alternating radii `1` and `inner_ratio`.
pub fn polygonize_hole(domain: &DomainSpec, hole: &HoleSpec, arc_tol: f64) -> Result<Vec<Point>> {
    if !(arc_tol > 0.0) {
        return Err(crate::Error::InvalidInput(format!("arc_tol must be positive, got {arc_tol}")));
    }
    hole.validate_in(domain)?;
    let [cx, cy] = hole.center;
    let eps = hole.scale;
    let poly = match hole.shape {
        HoleShape::Disk => {
            // sagitta of a chord spanning 2π/k on the unit circle: 1 − cos(π/k)
            let c = (1.0 - arc_tol).max(-1.0);
            let k = ((PI / c.acos()).ceil() as usize).max(4);
            (0..k)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / k as f64;
                    [cx + eps * t.cos(), cy + eps * t.sin()]
                })
                .collect()
        }
        HoleShape::Star {
            points,
            inner_ratio,
        } => {
            let p = points as usize;
            (0..2 * p)
                .map(|j| {
                    let t = PI / 2.0 + PI * j as f64 / p as f64;
                    let r = if j % 2 == 0 { 1.0 } else { inner_ratio };
                    [cx + eps * r * t.cos(), cy + eps * r * t.sin()]
                })
                .collect()
        }
    };
    Ok(poly)
}

/// Winding number of a closed polygon around `p` (0 outside for simple polygons).
pub fn winding_number(poly: &[Point], p: Point) -> i32 {
    let mut wn = 0;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    winding_number(poly, p) != 0
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Unsigned distance from `p` to the polygon boundary.
pub fn distance_to_polygon(poly: &[Point], p: Point) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| segment_distance(poly[i], poly[(i + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

/// Signed (shoelace) area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

pub fn polygon_perimeter(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum()
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o = |p: Point, q: Point, r: Point| robust::orient2d(coord(p), coord(q), coord(r));
    let d1 = o(c, d, a);
    let d2 = o(c, d, b);
    let d3 = o(a, b, c);
    let d4 = o(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, orient: f64| {
        orient == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

pub(crate) fn coord(p: Point) -> robust::Coord<f64> {
    robust::Coord { x: p[0], y: p[1] }
}

/// Segment-pair sweep: no two non-adjacent edges touch and adjacent edges share
/// only their common vertex.
pub fn is_simple_polygon(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in i + 1..n {
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // collinear overlap would fold the boundary back on itself
                let shared = if j == i + 1 { b } else { a };
                let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                if robust::orient2d(coord(p), coord(shared), coord(q)) == 0.0 {
                    let u = [p[0] - shared[0], p[1] - shared[1]];
                    let v = [q[0] - shared[0], q[1] - shared[1]];
                    if u[0] * v[0] + u[1] * v[1] > 0.0 {
                        return false;
                    }
                }
                continue;
            }
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
