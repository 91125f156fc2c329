#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use whomog::cell::{homogenize, EffectiveTensor};
use whomog::fem::{DiffusionSpec, ReactionSpec};
use whomog::geometry::{CellMesh, Point, UnitCellGeometry};
use whomog::macroscopic::{run_macro, AveragedReactions, MacroMesh, MacroProblem, MacroState, TimeGrid};

/// Default disc cell at `h = 0.05` with its isotropic effective tensor.
pub fn cell() -> &'static (Arc<CellMesh>, EffectiveTensor) {
    static CELL: OnceLock<(Arc<CellMesh>, EffectiveTensor)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.05).unwrap());
        let (_, d) = homogenize(&cell, &DiffusionSpec::default()).unwrap();
        (cell, d)
    })
}

pub fn mms_exact(t: f64, x: Point) -> f64 {
    (-t).exp() * (PI * x[0]).cos() * (PI * x[1]).cos()
}

/// L² error at `t_end` of the macro scheme for the manufactured solution
/// `u¹ = e^{−t}cos(πx₁)cos(πx₂)` without reactions.
pub fn mms_error(n: usize, dt: f64, t_end: f64) -> f64 {
    let (cell, tensor) = cell();
    let d = tensor.entries[0][0];
    let iso = EffectiveTensor::from_entries([[d, 0.0], [0.0, d]]);
    let reactions = AveragedReactions::new(cell, ReactionSpec::none());
    let w1 = reactions.measures.y1 + reactions.measures.gamma;
    // W₁∂ₜu − d·Δu = (2π²d − W₁)u
    let rate = 2.0 * PI * PI * d - w1;
    let problem = MacroProblem {
        mesh: MacroMesh::new(n).unwrap(),
        tensor: iso,
        reactions,
        source: Some(Arc::new(move |t, x| rate * mms_exact(t, x))),
    };
    let u1 = problem.mesh.interpolate(|x| mms_exact(0.0, x));
    let u2 = vec![0.0; u1.len()];
    let grid = TimeGrid::new(dt, t_end).unwrap();
    let traj = run_macro(&problem, MacroState { t: 0.0, u1, u2 }, &grid, &[t_end]).unwrap();
    let last = &traj.snapshots[0];
    problem.mesh.l2_error(&last.u1, |x| mms_exact(last.t, x))
}

pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
