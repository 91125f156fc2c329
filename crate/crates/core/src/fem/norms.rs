//! Discrete norms of the ε-weighted bulk–surface spaces.
//!
//! For a nodal vector `u` on a side mesh (whose interface values are its
//! trace), with `ε` the period of the side:
//!
//! * `‖u‖²_𝕃 = ‖u‖²_{L²(Ω)} + ε‖u‖²_{L²(Γ)}`
//! * `‖u‖²_ℍ = ‖u‖²_{H¹(Ω)} + ε‖u‖²_{H¹(Γ)}`

use super::assembly::{
    assemble_bulk_mass, assemble_bulk_stiffness, assemble_side_surface_mass,
    assemble_side_surface_stiffness,
};
use super::model::{ScalarField, TensorField};
use crate::error::{Error, Result};
use crate::geometry::SideMesh;
use crate::sparse::SparseOperator;

/// Unweighted mass and Dirichlet-energy operators of one side.
#[derive(Debug, Clone)]
pub struct NormOperators {
    pub epsilon: f64,
    pub bulk_mass: SparseOperator,
    pub bulk_energy: SparseOperator,
    pub surface_mass: SparseOperator,
    pub surface_energy: SparseOperator,
    interface_nodes: Vec<usize>,
}

impl NormOperators {
    pub fn new(side: &SideMesh) -> Self {
        Self {
            epsilon: side.epsilon,
            bulk_mass: assemble_bulk_mass(side, 1.0),
            bulk_energy: assemble_bulk_stiffness(side, &TensorField::isotropic(1.0), 1.0)
                .expect("constant tensor is finite"),
            surface_mass: assemble_side_surface_mass(side, 1.0),
            surface_energy: assemble_side_surface_stiffness(side, &ScalarField::Constant(1.0), 1.0)
                .expect("constant diffusivity is finite"),
            interface_nodes: side.interface_nodes.clone(),
        }
    }

    pub fn bulk_l2(&self, u: &[f64]) -> f64 {
        self.bulk_mass.quadratic_form(u).max(0.0).sqrt()
    }

    pub fn bulk_gradient(&self, u: &[f64]) -> f64 {
        self.bulk_energy.quadratic_form(u).max(0.0).sqrt()
    }

    pub fn surface_l2(&self, u: &[f64]) -> f64 {
        self.surface_mass.quadratic_form(u).max(0.0).sqrt()
    }

    pub fn surface_gradient(&self, u: &[f64]) -> f64 {
        self.surface_energy.quadratic_form(u).max(0.0).sqrt()
    }

    /// `‖u‖_𝕃`
    pub fn l_norm(&self, u: &[f64]) -> f64 {
        (self.bulk_mass.quadratic_form(u) + self.epsilon * self.surface_mass.quadratic_form(u))
            .max(0.0)
            .sqrt()
    }

    /// `‖u‖_ℍ` of a bulk vector; its trace is the restriction by construction.
    pub fn h_norm(&self, u: &[f64]) -> f64 {
        let bulk = self.bulk_mass.quadratic_form(u) + self.bulk_energy.quadratic_form(u);
        let surf = self.surface_mass.quadratic_form(u) + self.surface_energy.quadratic_form(u);
        (bulk + self.epsilon * surf).max(0.0).sqrt()
    }

    /// `‖(u, v)‖_ℍ` for a bulk vector and a separately stored trace `v`,
    /// which must coincide with the restriction of `u`.
    pub fn hje_norm(&self, bulk: &[f64], trace: &[f64]) -> Result<f64> {
        if trace.len() != self.interface_nodes.len() {
            return Err(Error::Consistency(format!(
                "trace has {} values, interface has {} nodes",
                trace.len(),
                self.interface_nodes.len()
            )));
        }
        for (i, (&node, &v)) in self.interface_nodes.iter().zip(trace).enumerate() {
            let defect = (bulk[node] - v).abs();
            if defect > 1e-12 * (1.0 + v.abs()) {
                return Err(Error::Consistency(format!(
                    "interface node {i}: bulk {} vs trace {v}",
                    bulk[node]
                )));
            }
        }
        Ok(self.h_norm(bulk))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_epsilon_tiling, CellMesh, Phase, Point, UnitCellGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn unit_field_on_the_inclusions() {
        let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.05).unwrap());
        let tiling = build_epsilon_tiling(cell.clone(), 2).unwrap();
        let side = tiling.side(Phase::Y2);
        let ops = NormOperators::new(side);
        let ones = vec![1.0; side.vertex_count()];
        let expected = (cell.area(Phase::Y2) + 0.5 * 4.0 * 0.5 * cell.gamma_length()).sqrt();
        let trace = side.trace(&ones);
        assert!((ops.hje_norm(&ones, &trace).unwrap() - expected).abs() < 1e-12);
        assert!((expected - (PI / 16.0 + 0.5 * PI).sqrt()).abs() < 1e-2);
        let zeros = vec![0.0; side.vertex_count()];
        assert_eq!(ops.hje_norm(&zeros, &side.trace(&zeros)).unwrap(), 0.0);
    }

    #[test]
    fn inconsistent_trace_is_rejected() {
        let cell = CellMesh::build(&UnitCellGeometry::default(), 0.1).unwrap();
        let side = cell.side(Phase::Y1);
        let ops = NormOperators::new(side);
        let u = vec![1.0; side.vertex_count()];
        let mut trace = side.trace(&u);
        trace[3] += 1e-6;
        assert!(matches!(ops.hje_norm(&u, &trace), Err(Error::Consistency(_))));
    }

    /// Element-by-element quadrature of the same norm, with the midpoint-edge
    /// rule (exact for quadratics) for the L² parts.
    fn quadrature_h_norm(side: &crate::geometry::SideMesh, u: &[f64]) -> f64 {
        let mut bulk = 0.0;
        for &[a, b, c] in &side.triangles {
            let p: [Point; 3] = [side.vertices[a], side.vertices[b], side.vertices[c]];
            let area = 0.5
                * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
            let (ua, ub, uc) = (u[a], u[b], u[c]);
            let mids = [0.5 * (ua + ub), 0.5 * (ub + uc), 0.5 * (uc + ua)];
            bulk += area / 3.0 * mids.iter().map(|m| m * m).sum::<f64>();
            // gradient from the plane through the three values
            let det = 2.0 * area;
            let gx = ((ub - ua) * (p[2][1] - p[0][1]) - (uc - ua) * (p[1][1] - p[0][1])) / det;
            let gy = ((uc - ua) * (p[1][0] - p[0][0]) - (ub - ua) * (p[2][0] - p[0][0])) / det;
            bulk += area * (gx * gx + gy * gy);
        }
        let mut surf = 0.0;
        for &[a, b] in &side.surface_edges {
            let (pa, pb) = (side.vertices[a], side.vertices[b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let (ua, ub) = (u[a], u[b]);
            // Simpson is exact for the quadratic u²
            let mid = 0.5 * (ua + ub);
            surf += len / 6.0 * (ua * ua + 4.0 * mid * mid + ub * ub);
            surf += (ub - ua).powi(2) / len;
        }
        (bulk + side.epsilon * surf).sqrt()
    }

    #[test]
    fn matches_direct_quadrature() {
        let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 4] {
            let tiling = build_epsilon_tiling(cell.clone(), n).unwrap();
            for phase in Phase::BOTH {
                let side = tiling.side(phase);
                let ops = NormOperators::new(side);
                let u: Vec<f64> = (0..side.vertex_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let direct = quadrature_h_norm(side, &u);
                let h = ops.h_norm(&u);
                assert!((h - direct).abs() <= 1e-10 * direct, "{h} vs {direct}");
                assert!(ops.l_norm(&u) <= h);
            }
        }
    }
}
