//! Unit-cell geometry, the fitted periodic cell mesh, the interface polygon
//! and the ε-scaled tilings of Ω = (0,1)².

mod cell_mesh;
pub mod io;
mod mesh;
mod side;
mod surface;
mod tiling;

pub use cell_mesh::{build_cell_mesh, CellMesh, MIN_INTERFACE_NODES};
pub use mesh::{BoundaryTag, TriangleMesh};
pub use side::SideMesh;
pub use surface::{extract_surface_mesh, SurfaceMesh};
pub use tiling::{build_epsilon_tiling, EpsilonTiling};

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Which component of the cell a triangle (or a field) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// Connected matrix `Y₁ = Y \ closure(Y₂)`.
    Y1,
    /// The inclusion `Y₂`.
    Y2,
}

impl Phase {
    pub const BOTH: [Phase; 2] = [Phase::Y1, Phase::Y2];

    pub fn index(self) -> usize {
        match self {
            Phase::Y1 => 0,
            Phase::Y2 => 1,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Phase::Y1 => 1,
            Phase::Y2 => 2,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            1 => Some(Phase::Y1),
            2 => Some(Phase::Y2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InclusionKind {
    Disc,
}

/// A single disc inclusion strictly inside the unit cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCellGeometry {
    pub inclusion: InclusionKind,
    pub center: Point,
    pub radius: f64,
    /// Required minimal distance between Γ and ∂Y.
    pub clearance: f64,
}

impl Default for UnitCellGeometry {
    fn default() -> Self {
        Self {
            inclusion: InclusionKind::Disc,
            center: [0.5, 0.5],
            radius: 0.25,
            clearance: 0.05,
        }
    }
}

impl UnitCellGeometry {
    pub fn disc(center: Point, radius: f64, clearance: f64) -> Result<Self> {
        let geom = Self {
            inclusion: InclusionKind::Disc,
            center,
            radius,
            clearance,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// dist(Γ, ∂Y)
    pub fn boundary_distance(&self) -> f64 {
        let [cx, cy] = self.center;
        cx.min(1.0 - cx).min(cy).min(1.0 - cy) - self.radius
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.center.iter().all(|c| c.is_finite())
            && self.radius.is_finite()
            && self.clearance.is_finite();
        if !finite {
            return Err(Error::Geometry("non-finite geometry parameter".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Geometry(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.clearance > 0.0) {
            return Err(Error::Geometry("clearance must be positive".into()));
        }
        let dist = self.boundary_distance();
        if dist < self.clearance {
            return Err(Error::Geometry(format!(
                "inclusion too close to the cell boundary: dist(Γ, ∂Y) = {dist} < clearance {}",
                self.clearance
            )));
        }
        Ok(())
    }

    /// |Y₂| of the exact disc.
    pub fn inclusion_area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// |Γ| of the exact circle.
    pub fn interface_length(&self) -> f64 {
        2.0 * PI * self.radius
    }

    pub fn point_on_interface(&self, angle: f64) -> Point {
        [
            self.center[0] + self.radius * angle.cos(),
            self.center[1] + self.radius * angle.sin(),
        ]
    }
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

/// Twice the signed area of the triangle `(a, b, c)`.
#[inline]
pub(crate) fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Reference-cell coordinate `frac(x/ε)`.
#[inline]
pub fn reference_point(x: Point, epsilon: f64) -> Point {
    let s = [x[0] / epsilon, x[1] / epsilon];
    [s[0] - s[0].floor(), s[1] - s[1].floor()]
}
