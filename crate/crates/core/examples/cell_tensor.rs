//! Effective tensor of the disc cell under mesh refinement.
//!
//! `cargo run --release --example cell_tensor`

use whomog::cell::{homogenize, GOLDEN_D_HAT};
use whomog::fem::DiffusionSpec;
use whomog::geometry::{CellMesh, UnitCellGeometry};

fn main() -> whomog::Result<()> {
    let geometry = UnitCellGeometry::default();
    let diffusion = DiffusionSpec::default();
    println!("{:>8} {:>8} {:>14} {:>14} {:>10}", "h", "nodes", "D11", "D12", "rel.err");
    for h in [0.1, 0.05, 0.025, 0.0125] {
        let cell = CellMesh::build(&geometry, h)?;
        let (_, d) = homogenize(&cell, &diffusion)?;
        d.certify()?;
        let e = d.entries;
        println!(
            "{h:>8} {:>8} {:>14.10} {:>14.2e} {:>10.2e}",
            cell.mesh.vertex_count(),
            e[0][0],
            e[0][1],
            (e[0][0] - GOLDEN_D_HAT).abs() / GOLDEN_D_HAT
        );
    }
    Ok(())
}
