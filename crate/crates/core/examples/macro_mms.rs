//! Spatial convergence of the limit solver on a manufactured solution.
//!
//! `cargo run --release --example macro_mms`

use std::f64::consts::PI;
use std::sync::Arc;

use whomog::cell::{homogenize, EffectiveTensor};
use whomog::fem::{DiffusionSpec, ReactionSpec};
use whomog::geometry::{CellMesh, Point, UnitCellGeometry};
use whomog::macroscopic::{run_macro, AveragedReactions, MacroMesh, MacroProblem, MacroState, TimeGrid};

fn exact(t: f64, x: Point) -> f64 {
    (-t).exp() * (PI * x[0]).cos() * (PI * x[1]).cos()
}

fn main() -> whomog::Result<()> {
    let cell = CellMesh::build(&UnitCellGeometry::default(), 0.05)?;
    let (_, tensor) = homogenize(&cell, &DiffusionSpec::default())?;
    let d = tensor.entries[0][0];
    let t_end = 0.25;
    let mut previous: Option<f64> = None;
    println!("{:>4} {:>12} {:>6}", "n", "L2 error", "order");
    for n in [8, 16, 32, 64] {
        let reactions = AveragedReactions::new(&cell, ReactionSpec::none());
        let w1 = reactions.measures.y1 + reactions.measures.gamma;
        let rate = 2.0 * PI * PI * d - w1;
        let problem = MacroProblem {
            mesh: MacroMesh::new(n)?,
            tensor: EffectiveTensor::from_entries([[d, 0.0], [0.0, d]]),
            reactions,
            source: Some(Arc::new(move |t, x| rate * exact(t, x))),
        };
        let u1 = problem.mesh.interpolate(|x| exact(0.0, x));
        let u2 = vec![0.0; u1.len()];
        let h = 1.0 / n as f64;
        let grid = TimeGrid::new(h * h, t_end)?;
        let traj = run_macro(&problem, MacroState { t: 0.0, u1, u2 }, &grid, &[t_end])?;
        let err = problem.mesh.l2_error(&traj.snapshots[0].u1, |x| exact(t_end, x));
        let order = previous.map(|p| format!("{:.2}", (p / err).log2())).unwrap_or_default();
        println!("{n:>4} {err:>12.4e} {order:>6}");
        previous = Some(err);
    }
    Ok(())
}
