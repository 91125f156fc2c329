//! P1 mass and stiffness operators on triangles and on interface polygons.
//!
//! Bulk coefficients are evaluated once per triangle at the reference point
//! `frac(centroid/ε)`, surface coefficients once per edge at the reference
//! point of its midpoint.

use super::model::{ScalarField, TensorField};
use crate::error::{Error, Result};
use crate::geometry::{cross, dist, reference_point, Point, SideMesh, SurfaceMesh};
use crate::sparse::{SparseOperator, TripletBuilder};

/// Gradients of the three barycentric coordinates and the triangle area.
#[inline]
pub(crate) fn p1_gradients(p: [Point; 3]) -> ([Point; 3], f64) {
    let twice = cross(p[0], p[1], p[2]);
    let inv = 1.0 / twice;
    let g = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    (g, 0.5 * twice)
}

fn triangle_points(side: &SideMesh, tri: [usize; 3]) -> [Point; 3] {
    tri.map(|v| side.vertices[v])
}

/// `scale · ∫ D(x/ε) ∇φ_i · ∇φ_j` over the side mesh.
pub fn assemble_bulk_stiffness(side: &SideMesh, d: &TensorField, scale: f64) -> Result<SparseOperator> {
    let mut b = TripletBuilder::with_capacity(side.vertex_count(), 9 * side.triangles.len());
    for (t, &tri) in side.triangles.iter().enumerate() {
        let (g, area) = p1_gradients(triangle_points(side, tri));
        let y = reference_point(side.centroid(t), side.epsilon);
        let dt = d.eval(y);
        if dt.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("diffusion tensor at y = {y:?} is not finite")));
        }
        for i in 0..3 {
            let dg = [
                dt[0][0] * g[i][0] + dt[0][1] * g[i][1],
                dt[1][0] * g[i][0] + dt[1][1] * g[i][1],
            ];
            for j in 0..3 {
                let v = scale * area * (dg[0] * g[j][0] + dg[1] * g[j][1]);
                b.add(tri[j], tri[i], v);
            }
        }
    }
    Ok(b.build())
}

/// Consistent P1 mass `scale · ∫ φ_i φ_j` over the side mesh.
pub fn assemble_bulk_mass(side: &SideMesh, scale: f64) -> SparseOperator {
    let mut b = TripletBuilder::with_capacity(side.vertex_count(), 9 * side.triangles.len());
    for &tri in &side.triangles {
        let p = triangle_points(side, tri);
        let area = 0.5 * cross(p[0], p[1], p[2]);
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { 2.0 } else { 1.0 };
                b.add(tri[i], tri[j], scale * area * w / 12.0);
            }
        }
    }
    b.build()
}

fn polygon_stiffness(
    dim: usize,
    points: &[Point],
    edges: &[[usize; 2]],
    epsilon: f64,
    dg: &ScalarField,
    scale: f64,
) -> Result<SparseOperator> {
    let mut b = TripletBuilder::with_capacity(dim, 4 * edges.len());
    for &[p, q] in edges {
        let (a, c) = (points[p], points[q]);
        let len = dist(a, c);
        let mid = [0.5 * (a[0] + c[0]), 0.5 * (a[1] + c[1])];
        let g = dg.eval(reference_point(mid, epsilon));
        if !g.is_finite() {
            return Err(Error::Evaluation(format!("surface diffusivity at {mid:?} is not finite")));
        }
        let k = scale * g / len;
        b.add(p, p, k);
        b.add(q, q, k);
        b.add(p, q, -k);
        b.add(q, p, -k);
    }
    Ok(b.build())
}

fn polygon_mass(dim: usize, points: &[Point], edges: &[[usize; 2]], scale: f64) -> SparseOperator {
    let mut b = TripletBuilder::with_capacity(dim, 4 * edges.len());
    for &[p, q] in edges {
        let m = scale * dist(points[p], points[q]) / 6.0;
        b.add(p, p, 2.0 * m);
        b.add(q, q, 2.0 * m);
        b.add(p, q, m);
        b.add(q, p, m);
    }
    b.build()
}

/// Tangential stiffness along the interface edges of a side mesh, in the
/// side's bulk numbering (the trace of a bulk vector is read off directly).
pub fn assemble_side_surface_stiffness(side: &SideMesh, dg: &ScalarField, scale: f64) -> Result<SparseOperator> {
    polygon_stiffness(side.vertex_count(), &side.vertices, &side.surface_edges, side.epsilon, dg, scale)
}

/// Interface mass in the side's bulk numbering.
pub fn assemble_side_surface_mass(side: &SideMesh, scale: f64) -> SparseOperator {
    polygon_mass(side.vertex_count(), &side.vertices, &side.surface_edges, scale)
}

/// Tangential stiffness `scale · ∫_Γ D_Γ ∂_sφ_i ∂_sφ_j` in polygon numbering.
pub fn assemble_surface_stiffness(smesh: &SurfaceMesh, dg: &ScalarField, scale: f64) -> Result<SparseOperator> {
    polygon_stiffness(smesh.node_count(), &smesh.nodes, &smesh.edges, 1.0, dg, scale)
}

/// Interface mass in polygon numbering.
pub fn assemble_surface_mass(smesh: &SurfaceMesh, scale: f64) -> SparseOperator {
    polygon_mass(smesh.node_count(), &smesh.nodes, &smesh.edges, scale)
}

/// Values of `f` at the vertices of a side mesh.
pub fn interpolate(side: &SideMesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    side.vertices.iter().map(|&x| f(x)).collect()
}
