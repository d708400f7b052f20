//! Incremental Bowyer–Watson triangulation with exact orientation and
//! in-circle predicates.

use std::collections::HashMap;

use super::hole::coord;
use super::Point;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    // n[e] is the neighbor across the edge opposite v[e]
    n: [u32; 3],
}

/// Plain Delaunay triangulation of a point set; triangles are counter-clockwise.
#[derive(Debug, Clone)]
pub struct Triangulation {
    pub points: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

struct Builder {
    pts: Vec<Point>,
    tris: Vec<Tri>,
    alive: Vec<bool>,
    bad: Vec<bool>,
    seen: Vec<u32>,
    stamp: u32,
    rim_index: HashMap<u32, usize>,
}

impl Builder {
    fn orient(&self, a: u32, b: u32, p: Point) -> f64 {
        robust::orient2d(coord(self.pts[a as usize]), coord(self.pts[b as usize]), coord(p))
    }

    fn in_circle(&self, t: u32, p: Point) -> bool {
        let v = self.tris[t as usize].v;
        robust::incircle(
            coord(self.pts[v[0] as usize]),
            coord(self.pts[v[1] as usize]),
            coord(self.pts[v[2] as usize]),
            coord(p),
        ) > 0.0
    }

    fn locate(&self, start: u32, p: Point) -> u32 {
        let mut t = start;
        let limit = 4 * self.tris.len() + 16;
        for step in 0..limit {
            let tri = self.tris[t as usize];
            let mut next = NONE;
            for k in 0..3 {
                // rotate the first tested edge so a walk cannot cycle forever
                let e = (k + step) % 3;
                if self.orient(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3], p) < 0.0 {
                    next = tri.n[e];
                    break;
                }
            }
            if next == NONE {
                return t;
            }
            t = next;
        }
        // exhaustive fallback; never expected with exact predicates
        (0..self.tris.len() as u32)
            .find(|&t| {
                self.alive[t as usize] && {
                    let v = self.tris[t as usize].v;
                    (0..3).all(|e| self.orient(v[(e + 1) % 3], v[(e + 2) % 3], p) >= 0.0)
                }
            })
            .unwrap_or(start)
    }

    fn insert(&mut self, idx: u32, start: u32) -> Result<u32> {
        let p = self.pts[idx as usize];
        let t0 = self.locate(start, p);
        for &v in &self.tris[t0 as usize].v {
            if self.pts[v as usize] == p {
                return Err(Error::Mesh(format!("duplicate point {idx} coincides with vertex {v}")));
            }
        }

        self.stamp += 1;
        let stamp = self.stamp;
        let mut cavity = vec![t0];
        let mut stack = vec![t0];
        self.bad[t0 as usize] = true;
        self.seen[t0 as usize] = stamp;
        while let Some(s) = stack.pop() {
            for e in 0..3 {
                let nb = self.tris[s as usize].n[e];
                if nb == NONE || self.seen[nb as usize] == stamp {
                    continue;
                }
                self.seen[nb as usize] = stamp;
                if self.in_circle(nb, p) {
                    self.bad[nb as usize] = true;
                    cavity.push(nb);
                    stack.push(nb);
                }
            }
        }

        // boundary of the cavity: (a, b, outside neighbor, old triangle)
        let mut rim: Vec<(u32, u32, u32, u32)> = Vec::new();
        for &s in &cavity {
            let tri = self.tris[s as usize];
            for e in 0..3 {
                let nb = tri.n[e];
                if nb == NONE || !self.bad[nb as usize] {
                    rim.push((tri.v[(e + 1) % 3], tri.v[(e + 2) % 3], nb, s));
                }
            }
        }

        let first_new = self.tris.len() as u32;
        for (j, &(a, b, nb, old)) in rim.iter().enumerate() {
            if self.orient(a, b, p) <= 0.0 {
                return Err(Error::Mesh(format!("degenerate cavity while inserting point {idx}")));
            }
            let t = first_new + j as u32;
            self.tris.push(Tri {
                v: [a, b, idx],
                n: [NONE, NONE, nb],
            });
            self.alive.push(true);
            self.bad.push(false);
            self.seen.push(0);
            if nb != NONE {
                let slot = self.tris[nb as usize].n.iter().position(|&x| x == old).expect("neighbor link");
                self.tris[nb as usize].n[slot] = t;
            }
        }
        // each rim vertex starts exactly one rim edge and ends exactly one
        if rim.len() > 32 {
            self.rim_index.clear();
            self.rim_index.extend(rim.iter().enumerate().map(|(j, r)| (r.0, j)));
        }
        let index = &self.rim_index;
        let starting = |v: u32| -> usize {
            if rim.len() <= 32 {
                rim.iter().position(|r| r.0 == v).expect("closed cavity rim")
            } else {
                index[&v]
            }
        };
        for j in 0..rim.len() {
            let (_, b, _, _) = rim[j];
            let t = (first_new + j as u32) as usize;
            // edge (b, p) is shared with the new triangle starting at b
            let after = starting(b);
            self.tris[t].n[0] = first_new + after as u32;
            self.tris[(first_new + after as u32) as usize].n[1] = t as u32;
        }
        for &s in &cavity {
            self.alive[s as usize] = false;
            self.bad[s as usize] = false;
        }
        Ok(first_new)
    }
}

/// Position of a cell along the order-16 Hilbert curve.
fn hilbert_index(mut x: u32, mut y: u32) -> u64 {
    let n: u32 = 1 << 16;
    let mut d = 0u64;
    let mut s = n / 2;
    while s > 0 {
        let rx = (x & s > 0) as u32;
        let ry = (y & s > 0) as u32;
        d += s as u64 * s as u64 * ((3 * rx) ^ ry) as u64;
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

/// Triangulates `points`. Insertion follows a Hilbert-curve order, so the
/// result depends only on the point set and its indexing.
pub fn delaunay_triangulate(points: &[Point]) -> Result<Triangulation> {
    if points.len() < 3 {
        return Err(Error::Mesh("need at least three points".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::Mesh("non-finite point".into()));
        }
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let m = 100.0 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);

    let n = points.len() as u32;
    let mut pts = points.to_vec();
    pts.push([c[0] - 20.0 * m, c[1] - m]);
    pts.push([c[0] + 20.0 * m, c[1] - m]);
    pts.push([c[0], c[1] + 20.0 * m]);

    let mut b = Builder {
        pts,
        tris: vec![Tri {
            v: [n, n + 1, n + 2],
            n: [NONE; 3],
        }],
        alive: vec![true],
        bad: vec![false],
        seen: vec![0],
        stamp: 0,
        rim_index: HashMap::new(),
    };
    // spatially coherent insertion keeps walks and cavities short
    let span = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
    let mut order: Vec<(u64, u32)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let q = |d: usize| (((p[d] - lo[d]) / span[d]) * 65535.0).round() as u32;
            (hilbert_index(q(0), q(1)), i as u32)
        })
        .collect();
    order.sort_unstable();
    let mut last = 0u32;
    for (_, i) in order {
        last = b.insert(i, last)?;
    }

    let triangles = b
        .tris
        .iter()
        .zip(&b.alive)
        .filter(|(t, &alive)| alive && t.v.iter().all(|&v| v < n))
        .map(|(t, _)| [t.v[0] as usize, t.v[1] as usize, t.v[2] as usize])
        .collect();
    b.pts.truncate(n as usize);
    Ok(Triangulation {
        points: b.pts,
        triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn area(p: &[Point], t: [usize; 3]) -> f64 {
        let (a, b, c) = (p[t[0]], p[t[1]], p[t[2]]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    // brute force: no input point strictly inside any circumcircle
    fn assert_empty_circumcircles(tri: &Triangulation) {
        for t in &tri.triangles {
            let (a, b, c) = (tri.points[t[0]], tri.points[t[1]], tri.points[t[2]]);
            for (i, p) in tri.points.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                let s = robust::incircle(coord(a), coord(b), coord(c), coord(*p));
                assert!(s <= 0.0, "point {i} inside circumcircle of {t:?}");
            }
        }
    }

    #[test]
    fn random_points_are_delaunay_and_cover_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pts: Vec<Point> = (0..300).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        pts.extend([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let tri = delaunay_triangulate(&pts).unwrap();
        assert!(tri.triangles.iter().all(|&t| area(&tri.points, t) > 0.0));
        let total: f64 = tri.triangles.iter().map(|&t| area(&tri.points, t)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Euler: for a triangulated convex polygon with h hull vertices, T = 2n − h − 2
        assert_empty_circumcircles(&tri);
    }

    #[test]
    fn cocircular_grid_is_handled() {
        let mut pts = Vec::new();
        for j in 0..=10 {
            for i in 0..=20 {
                pts.push([i as f64 * 0.1, j as f64 * 0.1]);
            }
        }
        let tri = delaunay_triangulate(&pts).unwrap();
        assert_eq!(tri.triangles.len(), 2 * 20 * 10);
        let total: f64 = tri.triangles.iter().map(|&t| area(&tri.points, t)).sum();
        assert!((total - 2.0).abs() < 1e-12);
        assert_empty_circumcircles(&tri);
    }

    #[test]
    fn duplicate_point_rejected() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(delaunay_triangulate(&pts).is_err());
    }
}
