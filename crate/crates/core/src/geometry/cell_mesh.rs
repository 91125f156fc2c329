use std::f64::consts::PI;

use super::{
    cross, dist, extract_surface_mesh, mesh::BoundaryTag, Phase, Point, SideMesh, SurfaceMesh,
    TriangleMesh, UnitCellGeometry,
};
use crate::error::{Error, Result};

/// Coarsest admissible resolution of the interface polygon.
pub const MIN_INTERFACE_NODES: usize = 8;

const MAX_VERTICES: usize = 4_000_000;

/// Meshes the unit cell with an O-grid fitted to the disc.
///
/// The square boundary carries `m = ⌈1/target_h⌉` segments per face and the
/// circle carries `4m` nodes placed exactly on Γ. Rays join matching boundary
/// and circle nodes; the inclusion is filled by a shrunken square grid and a
/// blending annulus. Every quadrilateral is split into four triangles through
/// its centroid, so the mesh inherits the full symmetry group of a centered
/// disc.
pub fn build_cell_mesh(geom: &UnitCellGeometry, target_h: f64) -> Result<TriangleMesh> {
    geom.validate()?;
    if !(target_h > 0.0) || !target_h.is_finite() {
        return Err(Error::MeshGeneration(format!(
            "target_h must be positive and finite, got {target_h}"
        )));
    }
    let m_real = (1.0 / target_h).ceil();
    if m_real > (MAX_VERTICES as f64).sqrt() {
        return Err(Error::MeshGeneration(format!(
            "target_h = {target_h:e} exceeds the vertex budget of {MAX_VERTICES}"
        )));
    }
    let m = m_real as usize;
    let ring = 4 * m;
    if ring < MIN_INTERFACE_NODES {
        return Err(Error::MeshGeneration(format!(
            "target_h = {target_h} resolves the interface with only {ring} nodes \
             (at least {MIN_INTERFACE_NODES} required)"
        )));
    }

    let c = geom.center;
    let r = geom.radius;
    let square: Vec<Point> = (0..ring).map(|k| square_point(k, m)).collect();
    let circle: Vec<Point> = (0..ring)
        .map(|k| geom.point_on_interface(-PI / 4.0 + 2.0 * PI * k as f64 / ring as f64))
        .collect();

    let gap = (0..ring)
        .map(|k| dist(square[k], circle[k]))
        .fold(0.0, f64::max);
    let outer_layers = ((gap / target_h).ceil() as usize).max(1);
    let half = 0.5 * r;
    let inner_layers = ((m as f64 / PI).round() as usize).max(1);

    let estimate = 2 * (m + 1) * (m + 1) + 2 * ring * (outer_layers + inner_layers + 1);
    if estimate > MAX_VERTICES {
        return Err(Error::MeshGeneration(format!(
            "target_h = {target_h:e} exceeds the vertex budget of {MAX_VERTICES}"
        )));
    }

    let mut builder = QuadSplitter::default();

    // inner square grid with half-width `half`
    let grid_point = |a: usize, b: usize| -> Point {
        [
            c[0] + 2.0 * half * (a as f64 / m as f64 - 0.5),
            c[1] + 2.0 * half * (b as f64 / m as f64 - 0.5),
        ]
    };
    let mut grid = vec![0usize; (m + 1) * (m + 1)];
    for b in 0..=m {
        for a in 0..=m {
            grid[b * (m + 1) + a] = builder.vertex(grid_point(a, b));
        }
    }
    let g = |a: usize, b: usize| grid[b * (m + 1) + a];
    for b in 0..m {
        for a in 0..m {
            builder.quad([g(a, b), g(a + 1, b), g(a + 1, b + 1), g(a, b + 1)], Phase::Y2);
        }
    }

    // grid boundary in perimeter order
    let mut previous: Vec<usize> = (0..ring)
        .map(|k| {
            let (side, j) = (k / m, k % m);
            match side {
                0 => g(m, j),
                1 => g(m - j, m),
                2 => g(0, m - j),
                _ => g(j, 0),
            }
        })
        .collect();
    let grid_ring: Vec<Point> = previous.iter().map(|&v| builder.vertices[v]).collect();

    // blending annulus from the grid boundary to the circle
    for layer in 1..=inner_layers {
        let rho = layer as f64 / inner_layers as f64;
        let current: Vec<usize> = (0..ring)
            .map(|k| {
                let p = if layer == inner_layers {
                    circle[k]
                } else {
                    lerp(grid_ring[k], circle[k], rho)
                };
                builder.vertex(p)
            })
            .collect();
        builder.ring_layer(&previous, &current, Phase::Y2);
        previous = current;
    }
    let circle_ids = previous.clone();

    // matrix annulus from the circle to ∂Y
    for layer in 1..=outer_layers {
        let rho = layer as f64 / outer_layers as f64;
        let current: Vec<usize> = (0..ring)
            .map(|k| {
                let p = if layer == outer_layers {
                    square[k]
                } else {
                    lerp(circle[k], square[k], rho)
                };
                builder.vertex(p)
            })
            .collect();
        builder.ring_layer(&previous, &current, Phase::Y1);
        previous = current;
    }
    let square_ids = previous;

    let mut boundary_edges = Vec::with_capacity(2 * ring);
    for k in 0..ring {
        let next = (k + 1) % ring;
        boundary_edges.push(([circle_ids[k], circle_ids[next]], BoundaryTag::Interface));
    }
    for k in 0..ring {
        let next = (k + 1) % ring;
        boundary_edges.push(([square_ids[k], square_ids[next]], BoundaryTag::Outer));
    }

    // right face → left face, top face → bottom face, corners → (0,0)
    let mut periodic_pairs = Vec::with_capacity(2 * m + 1);
    for j in 1..m {
        periodic_pairs.push((square_ids[3 * m - j], square_ids[j]));
    }
    for j in 1..m {
        periodic_pairs.push((square_ids[4 * m - j], square_ids[m + j]));
    }
    let origin = square_ids[3 * m];
    for corner in [0, m, 2 * m] {
        periodic_pairs.push((origin, square_ids[corner]));
    }

    let mesh = TriangleMesh {
        vertices: builder.vertices,
        triangles: builder.triangles,
        tags: builder.tags,
        boundary_edges,
        periodic_pairs,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Point `k` of the unit-square perimeter walked counter-clockwise from the
/// corner (1,0), with `m` segments per face.
fn square_point(k: usize, m: usize) -> Point {
    let (side, j) = (k / m, k % m);
    let t = j as f64 / m as f64;
    match side {
        0 => [1.0, t],
        1 => [1.0 - t, 1.0],
        2 => [0.0, 1.0 - t],
        _ => [t, 0.0],
    }
}

fn lerp(a: Point, b: Point, rho: f64) -> Point {
    [(1.0 - rho) * a[0] + rho * b[0], (1.0 - rho) * a[1] + rho * b[1]]
}

#[derive(Default)]
struct QuadSplitter {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<Phase>,
}

/// Vertices are rounded to multiples of 2⁻⁴⁰ so that for ε = 2⁻ᵐ the
/// scaled copies `ε(k + y)` of a tiling are exact in floating point.
const DYADIC_GRID: f64 = (1u64 << 40) as f64;

fn snap(p: Point) -> Point {
    p.map(|c| (c * DYADIC_GRID).round() / DYADIC_GRID)
}

impl QuadSplitter {
    fn vertex(&mut self, p: Point) -> usize {
        self.vertices.push(snap(p));
        self.vertices.len() - 1
    }

    fn quad(&mut self, q: [usize; 4], phase: Phase) {
        let pts = q.map(|v| self.vertices[v]);
        let centroid = [
            0.25 * (pts[0][0] + pts[1][0] + pts[2][0] + pts[3][0]),
            0.25 * (pts[0][1] + pts[1][1] + pts[2][1] + pts[3][1]),
        ];
        let mid = self.vertex(centroid);
        for i in 0..4 {
            let (a, b) = (q[i], q[(i + 1) % 4]);
            let tri = if cross(self.vertices[a], self.vertices[b], self.vertices[mid]) > 0.0 {
                [a, b, mid]
            } else {
                [b, a, mid]
            };
            self.triangles.push(tri);
            self.tags.push(phase);
        }
    }

    fn ring_layer(&mut self, inner: &[usize], outer: &[usize], phase: Phase) {
        let n = inner.len();
        for k in 0..n {
            let next = (k + 1) % n;
            self.quad([inner[k], inner[next], outer[next], outer[k]], phase);
        }
    }
}

/// The meshed unit cell together with its interface polygon and the two
/// one-sided meshes used by the cell problems and the micro tilings.
#[derive(Debug, Clone)]
pub struct CellMesh {
    pub geometry: Option<UnitCellGeometry>,
    pub mesh: TriangleMesh,
    pub surface: SurfaceMesh,
    sides: [SideMesh; 2],
}

impl CellMesh {
    pub fn build(geom: &UnitCellGeometry, target_h: f64) -> Result<Self> {
        let mesh = build_cell_mesh(geom, target_h)?;
        let mut cell = Self::from_mesh(mesh)?;
        cell.geometry = Some(*geom);
        Ok(cell)
    }

    /// Wraps an externally produced mesh (for instance one read from disk).
    pub fn from_mesh(mesh: TriangleMesh) -> Result<Self> {
        mesh.validate()?;
        let surface = extract_surface_mesh(&mesh)?;
        let sides = [
            SideMesh::from_cell(&mesh, &surface, Phase::Y1)?,
            SideMesh::from_cell(&mesh, &surface, Phase::Y2)?,
        ];
        Ok(Self {
            geometry: None,
            mesh,
            surface,
            sides,
        })
    }

    pub fn side(&self, phase: Phase) -> &SideMesh {
        &self.sides[phase.index()]
    }

    /// Meshed |Y_j|.
    pub fn area(&self, phase: Phase) -> f64 {
        self.side(phase).area()
    }

    /// Meshed |Γ|.
    pub fn gamma_length(&self) -> f64 {
        self.surface.length()
    }

    pub fn mesh_size(&self) -> f64 {
        self.mesh.mesh_size()
    }
}
