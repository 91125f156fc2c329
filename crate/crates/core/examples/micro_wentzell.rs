//! The ε-problem with interface exchange at ε = 1/4: masses and a priori norms.
//!
//! `cargo run --release --example micro_wentzell`

use std::sync::Arc;

use whomog::fem::{DiffusionSpec, ReactionModel, ReactionSpec};
use whomog::geometry::{build_epsilon_tiling, CellMesh, Point, UnitCellGeometry};
use whomog::macroscopic::TimeGrid;
use whomog::microscopic::{build_wentzell_system, micro_initial_state, micro_run, InitialData};

fn main() -> whomog::Result<()> {
    let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.125)?);
    let tiling = Arc::new(build_epsilon_tiling(cell, 4)?);
    let sys = build_wentzell_system(tiling, &DiffusionSpec::default())?;
    let data = InitialData {
        bulk: [
            Arc::new(|x: Point, _: Point| 1.0 + 2.0 * x[0] * x[1]),
            Arc::new(|_: Point, y: Point| 0.25 + 0.5 * y[0]),
        ],
        surface: None,
    };
    let reactions = ReactionSpec::from_model(ReactionModel::Exchange { rate: 1.0 });
    let grid = TimeGrid::new(1e-3, 0.5)?;
    let times: Vec<f64> = (0..=5).map(|k| 0.1 * k as f64).collect();
    let traj = micro_run(&sys, &reactions, micro_initial_state(&sys, &data)?, &grid, &times, None)?;
    println!("{:>6} {:>14} {:>14} {:>14}", "t", "mass1", "mass2", "total");
    for d in traj.diagnostics.iter().step_by(100) {
        println!("{:>6.3} {:>14.8} {:>14.8} {:>14.10}", d.t, d.mass1, d.mass2, d.mass1 + d.mass2);
    }
    println!("a priori norms: {:.4e} {:.4e}", traj.hje_time_norms[0], traj.hje_time_norms[1]);
    Ok(())
}
