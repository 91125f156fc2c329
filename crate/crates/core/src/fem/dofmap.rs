use crate::error::{Error, Result};
use crate::geometry::{CellMesh, EpsilonTiling, Phase, SideMesh};
use crate::sparse::{SparseOperator, TripletBuilder};

/// Identification of periodic images: every full DOF maps to the reduced
/// DOF of its master.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicReduction {
    full_to_reduced: Vec<usize>,
    reduced_dim: usize,
}

impl PeriodicReduction {
    pub fn new(periodic_master: &[usize]) -> Self {
        let mut full_to_reduced = vec![usize::MAX; periodic_master.len()];
        let mut reduced_dim = 0;
        for (i, &m) in periodic_master.iter().enumerate() {
            if m == i {
                full_to_reduced[i] = reduced_dim;
                reduced_dim += 1;
            }
        }
        for (i, &m) in periodic_master.iter().enumerate() {
            full_to_reduced[i] = full_to_reduced[m];
        }
        Self {
            full_to_reduced,
            reduced_dim,
        }
    }

    pub fn from_side(side: &SideMesh) -> Self {
        Self::new(&side.periodic_master)
    }

    pub fn full_dim(&self) -> usize {
        self.full_to_reduced.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    pub fn reduced_index(&self, full: usize) -> usize {
        self.full_to_reduced[full]
    }

    /// `Rᵀ A R`
    pub fn reduce_operator(&self, a: &SparseOperator) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity(self.reduced_dim, a.nnz());
        for i in 0..a.dim() {
            let ri = self.full_to_reduced[i];
            for (j, v) in a.row(i) {
                b.add(ri, self.full_to_reduced[j], v);
            }
        }
        b.build()
    }

    /// `Rᵀ b`
    pub fn reduce_vector(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.reduced_dim];
        for (i, &v) in b.iter().enumerate() {
            out[self.full_to_reduced[i]] += v;
        }
        out
    }

    /// `R x`
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.full_to_reduced.iter().map(|&r| x[r]).collect()
    }

    /// Replaces every value with its master's value.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let mut reduced = vec![f64::NAN; self.reduced_dim];
        for (i, &r) in self.full_to_reduced.iter().enumerate() {
            if reduced[r].is_nan() {
                reduced[r] = u[i];
            }
        }
        self.expand(&reduced)
    }
}

/// Bulk and interface DOFs of the two sides. Each side has its own copy of
/// the interface nodes, so the two traces are independent unknowns.
#[derive(Debug, Clone)]
pub struct CoupledDofMap {
    pub bulk_dofs: [usize; 2],
    pub interface: [Vec<usize>; 2],
    /// Present for cell problems only.
    pub periodic: Option<PeriodicReduction>,
}

impl CoupledDofMap {
    pub fn for_cell(cell: &CellMesh) -> Result<Self> {
        let map = Self {
            bulk_dofs: Phase::BOTH.map(|p| cell.side(p).vertex_count()),
            interface: Phase::BOTH.map(|p| cell.side(p).interface_nodes.clone()),
            periodic: Some(PeriodicReduction::from_side(cell.side(Phase::Y1))),
        };
        map.check()?;
        Ok(map)
    }

    pub fn for_tiling(tiling: &EpsilonTiling) -> Result<Self> {
        let map = Self {
            bulk_dofs: Phase::BOTH.map(|p| tiling.side(p).vertex_count()),
            interface: Phase::BOTH.map(|p| tiling.side(p).interface_nodes.clone()),
            periodic: None,
        };
        map.check()?;
        Ok(map)
    }

    /// Interface DOFs must be bulk DOFs and both sides must see the same
    /// number of interface nodes.
    pub fn check(&self) -> Result<()> {
        for j in 0..2 {
            if let Some(&bad) = self.interface[j].iter().find(|&&v| v >= self.bulk_dofs[j]) {
                return Err(Error::Consistency(format!("interface DOF {bad} is not a bulk DOF of side {}", j + 1)));
            }
        }
        if self.interface[0].len() != self.interface[1].len() {
            return Err(Error::Consistency("the two sides disagree on the interface node count".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_epsilon_tiling, UnitCellGeometry};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn reduction_of_the_cell_matrix_side() {
        let cell = CellMesh::build(&UnitCellGeometry::default(), 0.1).unwrap();
        let map = CoupledDofMap::for_cell(&cell).unwrap();
        let red = map.periodic.as_ref().unwrap();
        // 2m + 1 slaves with m = 10
        assert_eq!(red.full_dim() - red.reduced_dim(), 21);
        let ones = vec![1.0; red.reduced_dim()];
        assert!(red.expand(&ones).iter().all(|&v| v == 1.0));
        let tiling = build_epsilon_tiling(Arc::new(cell), 2).unwrap();
        let tmap = CoupledDofMap::for_tiling(&tiling).unwrap();
        assert_eq!(tmap.interface[0].len(), 4 * tiling.cell.surface.node_count());
    }

    #[test]
    fn reduced_operator_is_the_galerkin_projection() {
        let cell = CellMesh::build(&UnitCellGeometry::default(), 0.2).unwrap();
        let side = cell.side(Phase::Y1);
        let red = PeriodicReduction::from_side(side);
        let m = crate::fem::assemble_bulk_mass(side, 1.0);
        let mr = red.reduce_operator(&m);
        let x: Vec<f64> = (0..red.reduced_dim()).map(|i| (i as f64).sin()).collect();
        let full = red.expand(&x);
        assert!((mr.quadratic_form(&x) - m.quadratic_form(&full)).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(values in prop::collection::vec(-5.0f64..5.0, 1..200)) {
            let cell = CellMesh::build(&UnitCellGeometry::default(), 0.2).unwrap();
            let side = cell.side(Phase::Y1);
            let red = PeriodicReduction::from_side(side);
            let u: Vec<f64> = (0..side.vertex_count()).map(|i| values[i % values.len()]).collect();
            let once = red.project(&u);
            prop_assert_eq!(red.project(&once), once.clone());
            for (i, &m) in side.periodic_master.iter().enumerate() {
                prop_assert_eq!(once[i], once[m]);
            }
        }
    }
}
