//! Domains, hole shapes and the matched perforated/filled triangulations.

mod delaunay;
mod hole;
mod mesh;
mod mesher;

pub use delaunay::{delaunay_triangulate, Triangulation};
pub use hole::{
    distance_to_polygon, is_simple_polygon, point_in_polygon, polygon_area, polygon_perimeter,
    polygonize_hole, winding_number,
};
pub use mesh::{compensated_sum, mesh_quality, BoundaryEdge, BoundaryTag, Mesh, MeshQuality};
pub use mesher::{
    build_matched_meshes, build_matched_meshes_with, build_rectangle_mesh, MatchedMeshPair, MesherOptions,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// The unperturbed domain Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    #[serde(rename = "rectangle")]
    Rectangle2D {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    /// Centered box (−a,a)×(−b,b)×(−c,c). Only used for analytic predictions.
    #[serde(rename = "box3d")]
    Box3D { a: f64, b: f64, c: f64 },
}

impl DomainSpec {
    /// The rectangle used by all 2D experiments.
    pub fn reference_rectangle() -> Self {
        DomainSpec::Rectangle2D {
            x_min: -4.0,
            x_max: 4.0,
            y_min: -2.0,
            y_max: 2.0,
        }
    }

    pub fn reference_box() -> Self {
        DomainSpec::Box3D {
            a: 1.0,
            b: 2.0,
            c: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainSpec::Rectangle2D {
                x_min,
                x_max,
                y_min,
                y_max,
            } => x_min < x_max && y_min < y_max && [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()),
            DomainSpec::Box3D { a, b, c } => [a, b, c].iter().all(|v| v.is_finite() && *v > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("degenerate domain {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Rectangle2D { .. } => 2,
            DomainSpec::Box3D { .. } => 3,
        }
    }

    /// Coordinate intervals `(lo, hi)` per axis.
    pub fn extents(&self) -> Vec<(f64, f64)> {
        match *self {
            DomainSpec::Rectangle2D {
                x_min,
                x_max,
                y_min,
                y_max,
            } => vec![(x_min, x_max), (y_min, y_max)],
            DomainSpec::Box3D { a, b, c } => vec![(-a, a), (-b, b), (-c, c)],
        }
    }

    pub fn measure(&self) -> f64 {
        self.extents().iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Closed-domain membership with an absolute slack `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let ext = self.extents();
        x.len() == ext.len()
            && x
                .iter()
                .zip(&ext)
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// Euclidean distance from an interior point to ∂Ω (minimum over the faces).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.extents()
            .iter()
            .zip(x)
            .map(|((lo, hi), v)| (v - lo).min(hi - v))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Reference hole shape Σ, always contained in the closed unit ball (r_0 = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HoleShape {
    Disk,
    Star { points: u32, inner_ratio: f64 },
}

impl HoleShape {
    pub fn circumradius(&self) -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            HoleShape::Disk => Ok(()),
            HoleShape::Star {
                points,
                inner_ratio,
            } => {
                if points < 3 || !(inner_ratio > 0.0 && inner_ratio < 1.0) {
                    Err(Error::InvalidInput(format!(
                        "star hole needs points >= 3 and inner_ratio in (0,1), got {points}, {inner_ratio}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Σ_ε = x0 + εΣ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub shape: HoleShape,
    pub center: Point,
    pub scale: f64,
}

impl HoleSpec {
    pub fn new(shape: HoleShape, center: Point, scale: f64) -> Self {
        Self {
            shape,
            center,
            scale,
        }
    }

    /// ε_0 = dist(x0, ∂Ω) / (1 + r_0).
    pub fn eps0(&self, domain: &DomainSpec) -> f64 {
        domain.distance_to_boundary(&self.center) / (1.0 + self.shape.circumradius())
    }

    /// Whether ε lies inside the range where the asymptotic theory applies.
    pub fn within_asymptotic_regime(&self, domain: &DomainSpec) -> bool {
        self.scale < self.eps0(domain)
    }

    /// Checks that the closed hole lies strictly inside Ω.
    pub fn validate_in(&self, domain: &DomainSpec) -> Result<()> {
        domain.validate()?;
        self.shape.validate()?;
        if domain.dim() != 2 {
            return Err(Error::InvalidInput("holes are only meshed in 2D domains".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidInput(format!("hole scale must be positive, got {}", self.scale)));
        }
        let dist = domain.distance_to_boundary(&self.center);
        let r0 = self.shape.circumradius();
        if !(dist > self.scale * r0) {
            return Err(Error::Clearance {
                eps: self.scale,
                dist,
                eps_bound: dist / r0,
                eps0: dist / (1.0 + r0),
            });
        }
        Ok(())
    }
}
