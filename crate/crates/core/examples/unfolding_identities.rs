//! Norm and gradient identities of the unfolding operator on random fields.
//!
//! `cargo run --release --example unfolding_identities`

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use whomog::fem::trace::random_field;
use whomog::geometry::{build_epsilon_tiling, CellMesh, Phase, UnitCellGeometry};
use whomog::two_scale::identity_defects;

fn main() -> whomog::Result<()> {
    let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.125)?);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>4} {:>4} {:>11} {:>11} {:>11} {:>11}", "1/ε", "side", "bulk", "surface", "grad bulk", "grad surf");
    for n in [2, 4, 8] {
        let tiling = build_epsilon_tiling(cell.clone(), n)?;
        for phase in Phase::BOTH {
            let u = random_field(tiling.side(phase), &mut rng);
            let d = identity_defects(&tiling, phase, &u)?;
            println!(
                "{n:>4} {:>4} {:>11.2e} {:>11.2e} {:>11.2e} {:>11.2e}",
                format!("{phase:?}"),
                d.bulk_norm,
                d.surface_norm,
                d.bulk_gradient,
                d.surface_gradient
            );
        }
    }
    Ok(())
}
