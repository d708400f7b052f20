use serde::{Deserialize, Serialize};

use super::forms::g_functions;
use super::spectrum::EigenspaceBasis;
use crate::error::{Error, Result};
use crate::output::{csv_row, Svg};

/// Samples of `g_1 − g_2` on the nodes of a uniform `nx × ny` cell grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMap {
    pub nx: usize,
    pub ny: usize,
    /// `[x_min, x_max, y_min, y_max]`
    pub bounds: [f64; 4],
    /// Node values, row by row from `y_min`; `(nx+1)·(ny+1)` entries.
    pub values: Vec<f64>,
    /// Values with `|v|` at most this are treated as zero.
    pub zero_tol: f64,
    /// Cells `(i, j)` whose corners change sign or touch zero.
    pub sign_change_cells: Vec<(usize, usize)>,
    pub fraction: f64,
    /// Zero contour from marching squares.
    pub segments: Vec<[[f64; 2]; 2]>,
    pub arc_length: f64,
}

/// How far a point sits from the detected sign-change set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointClearance {
    pub value: f64,
    pub local_variation: f64,
    pub cell_flagged: bool,
    /// `|value| > 10·local_variation` and the enclosing cell is not flagged.
    pub clear: bool,
}

impl GammaMap {
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let [x0, x1, y0, y1] = self.bounds;
        [
            x0 + (x1 - x0) * i as f64 / self.nx as f64,
            y0 + (y1 - y0) * j as f64 / self.ny as f64,
        ]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.nx + 1) + i]
    }

    fn cell_of(&self, x: [f64; 2]) -> Option<(usize, usize)> {
        let [x0, x1, y0, y1] = self.bounds;
        let s = (x[0] - x0) / (x1 - x0) * self.nx as f64;
        let t = (x[1] - y0) / (y1 - y0) * self.ny as f64;
        if !(0.0..=self.nx as f64).contains(&s) || !(0.0..=self.ny as f64).contains(&t) {
            return None;
        }
        Some(((s as usize).min(self.nx - 1), (t as usize).min(self.ny - 1)))
    }

    /// Compares `value` (the exact `g_1 − g_2` at `x`) with the spread of
    /// the grid values over the cell that contains `x`.
    pub fn clearance(&self, x: [f64; 2], value: f64) -> Result<PointClearance> {
        let (i, j) = self.cell_of(x).ok_or_else(|| Error::OutsideDomain { point: x.to_vec() })?;
        let corners = [self.value(i, j), self.value(i + 1, j), self.value(i, j + 1), self.value(i + 1, j + 1)];
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let local_variation = hi - lo;
        // cells are stored row by row
        let cell_flagged = self
            .sign_change_cells
            .binary_search_by(|&(a, b)| (b, a).cmp(&(j, i)))
            .is_ok();
        Ok(PointClearance {
            value,
            local_variation,
            cell_flagged,
            clear: !cell_flagged && value.abs() > 10.0 * local_variation,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,g1_minus_g2\n");
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let p = self.node(i, j);
                s.push_str(&csv_row(&[p[0], p[1], self.value(i, j)]));
                s.push('\n');
            }
        }
        s
    }

    /// Coarse sign shading, the zero contour and optional marked points.
    pub fn to_svg(&self, marks: &[[f64; 2]]) -> String {
        let [x0, x1, y0, y1] = self.bounds;
        let aspect = (y1 - y0) / (x1 - x0);
        let mut svg = Svg::new(880.0, 80.0 + 800.0 * aspect, self.bounds);
        let bx = self.nx.div_ceil(200).max(1);
        let by = self.ny.div_ceil(100).max(1);
        let (dx, dy) = ((x1 - x0) / self.nx as f64, (y1 - y0) / self.ny as f64);
        for j in (0..self.ny).step_by(by) {
            for i in (0..self.nx).step_by(bx) {
                let (ie, je) = ((i + bx).min(self.nx), (j + by).min(self.ny));
                let mean = (self.value(i, j) + self.value(ie, j) + self.value(i, je) + self.value(ie, je)) / 4.0;
                let fill = if mean > self.zero_tol {
                    "#f4c7b8"
                } else if mean < -self.zero_tol {
                    "#b8cdf4"
                } else {
                    "#ffffff"
                };
                let p = self.node(i, j);
                svg.rect(p[0], p[1], dx * (ie - i) as f64, dy * (je - j) as f64, fill);
            }
        }
        svg.segments(&self.segments, "black", 1.5);
        for m in marks {
            svg.circle(m[0], m[1], 4.0, "#c00000");
        }
        svg.frame();
        svg.text_px(40.0, 24.0, "sign of g1 - g2 (red positive, blue negative) with zero contour");
        svg.finish()
    }
}

/// Samples an arbitrary field on `nx × ny` cells over `bounds`.
pub fn gamma_map_from_fn(bounds: [f64; 4], nx: usize, ny: usize, f: impl Fn([f64; 2]) -> Result<f64>) -> Result<GammaMap> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("grid needs at least one cell per axis".into()));
    }
    let mut map = GammaMap {
        nx,
        ny,
        bounds,
        values: Vec::with_capacity((nx + 1) * (ny + 1)),
        zero_tol: 0.0,
        sign_change_cells: Vec::new(),
        fraction: 0.0,
        segments: Vec::new(),
        arc_length: 0.0,
    };
    for j in 0..=ny {
        for i in 0..=nx {
            let v = f(map.node(i, j))?;
            map.values.push(v);
        }
    }
    let scale = map.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    map.zero_tol = 1e-12 * scale;
    let class = |v: f64| -> i8 {
        if v > map.zero_tol {
            1
        } else if v < -map.zero_tol {
            -1
        } else {
            0
        }
    };
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = [
                class(map.value(i, j)),
                class(map.value(i + 1, j)),
                class(map.value(i, j + 1)),
                class(map.value(i + 1, j + 1)),
            ];
            if c.contains(&0) || (c.contains(&1) && c.contains(&-1)) {
                cells.push((i, j));
            }
        }
    }
    map.fraction = cells.len() as f64 / (nx * ny) as f64;
    map.sign_change_cells = cells;
    map.segments = marching_squares(&map);
    map.arc_length = map
        .segments
        .iter()
        .map(|s| (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1]))
        .sum();
    Ok(map)
}

/// Zero contour; values within the zero tolerance count as positive.
fn marching_squares(map: &GammaMap) -> Vec<[[f64; 2]; 2]> {
    let v = |i: usize, j: usize| {
        let x = map.value(i, j);
        if x.abs() <= map.zero_tol {
            map.zero_tol.max(f64::MIN_POSITIVE)
        } else {
            x
        }
    };
    let mut segs = Vec::new();
    for j in 0..map.ny {
        for i in 0..map.nx {
            // corners counter-clockwise
            let idx = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals: Vec<f64> = idx.iter().map(|&(a, b)| v(a, b)).collect();
            let mut cuts = Vec::new();
            for e in 0..4 {
                let (a, b) = (vals[e], vals[(e + 1) % 4]);
                if (a > 0.0) != (b > 0.0) {
                    let t = a / (a - b);
                    let (pa, pb) = (map.node(idx[e].0, idx[e].1), map.node(idx[(e + 1) % 4].0, idx[(e + 1) % 4].1));
                    cuts.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                }
            }
            match cuts.len() {
                2 => segs.push([cuts[0], cuts[1]]),
                4 => {
                    // saddle: pair the cuts by the sign of the cell average
                    let centre = vals.iter().sum::<f64>() / 4.0;
                    if (centre > 0.0) == (vals[0] > 0.0) {
                        segs.push([cuts[0], cuts[3]]);
                        segs.push([cuts[1], cuts[2]]);
                    } else {
                        segs.push([cuts[0], cuts[1]]);
                        segs.push([cuts[2], cuts[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

/// `g_1 − g_2` over the rectangle for a two-dimensional eigenspace.
pub fn gamma_map(basis: &EigenspaceBasis, nx: usize, ny: usize) -> Result<GammaMap> {
    if basis.dim() != 2 {
        return Err(Error::InvalidInput(format!("the map needs a double eigenvalue, got multiplicity {}", basis.dim())));
    }
    let ext = basis.domain.extents();
    if ext.len() != 2 {
        return Err(Error::InvalidInput("the map is two-dimensional".into()));
    }
    let bounds = [ext[0].0, ext[0].1, ext[1].0, ext[1].1];
    gamma_map_from_fn(bounds, nx, ny, |p| {
        let g = g_functions(basis, &p, 2)?;
        Ok(g[0] - g[1])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::Bc;
    use crate::geometry::DomainSpec;

    fn pair() -> EigenspaceBasis {
        EigenspaceBasis::cluster_at(&DomainSpec::reference_rectangle(), Bc::Neumann, 3).unwrap()
    }

    #[test]
    fn constant_difference_has_no_set() {
        let m = gamma_map_from_fn([-4.0, 4.0, -2.0, 2.0], 40, 20, |_| Ok(0.7)).unwrap();
        assert!(m.sign_change_cells.is_empty());
        assert_eq!(m.fraction, 0.0);
        assert_eq!(m.arc_length, 0.0);
    }

    #[test]
    fn straight_zero_line_has_exact_length() {
        let m = gamma_map_from_fn([0.0, 1.0, 0.0, 1.0], 37, 23, |p| Ok(p[0] - 0.3 * p[1] - 0.41)).unwrap();
        assert!((m.arc_length - 1.09f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rectangle_pair_set_is_thin_and_converges() {
        // the zero set is the four segments x ± y = ±2, total length 16√2
        let coarse = gamma_map(&pair(), 400, 200).unwrap();
        assert!(coarse.fraction <= 0.05, "fraction {}", coarse.fraction);
        let fine = gamma_map(&pair(), 800, 400).unwrap();
        assert!((fine.arc_length - coarse.arc_length).abs() <= 0.1 * fine.arc_length);
        assert!((fine.arc_length - 16.0 * 2f64.sqrt()).abs() < 0.05 * fine.arc_length);
    }

    #[test]
    fn csv_layout() {
        let m = gamma_map(&pair(), 4, 2).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 1 + 5 * 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("-4.0000000000000000e0,-2.0000000000000000e0,"));
        assert!(m.to_svg(&[[2.1, 0.1]]).contains("<circle"));
    }
}
