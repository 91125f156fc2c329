//! Calibrates the interpolation constant of the ε-scaled trace inequality
//! and validates it on fresh random fields. Constant fields have no
//! gradient and usually set the calibrated value, so `C` can be the same
//! for every θ while the validation ratios still drop as θ grows.
//!
//! `cargo run --release --example trace_inequality`

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use whomog::fem::trace::random_field;
use whomog::fem::{calibrate_trace_constant, NormOperators};
use whomog::geometry::{build_epsilon_tiling, CellMesh, Phase, UnitCellGeometry};

fn main() -> whomog::Result<()> {
    let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.125)?);
    let ns = [2, 4, 8];
    for theta in [0.25, 0.5, 0.75] {
        let cal = calibrate_trace_constant(&cell, theta, &ns, 20, 1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut worst = 0.0f64;
        for n in ns {
            let tiling = build_epsilon_tiling(cell.clone(), n)?;
            for phase in Phase::BOTH {
                let side = tiling.side(phase);
                let ops = NormOperators::new(side);
                for _ in 0..20 {
                    worst = worst.max(cal.inequality.check(&ops, &random_field(side, &mut rng)).ratio);
                }
            }
        }
        println!("θ = {theta}: C = {:.5}, worst validation ratio {worst:.3}", cal.inequality.constant);
    }
    Ok(())
}
