//! Builds a cell mesh, writes it, reads it back and homogenizes the copy.
//!
//! `cargo run --release --example mesh_export -- [output.mesh]`

use std::path::PathBuf;

use whomog::cell::homogenize;
use whomog::fem::DiffusionSpec;
use whomog::geometry::io::{read_mesh, write_mesh};
use whomog::geometry::{CellMesh, Phase, UnitCellGeometry};

fn main() -> whomog::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("whomog_cell.mesh"));
    let geometry = UnitCellGeometry::disc([0.5, 0.5], 0.3, 0.05)?;
    let cell = CellMesh::build(&geometry, 0.05)?;
    write_mesh(&cell.mesh, &path)?;
    let copy = CellMesh::from_mesh(read_mesh(&path)?)?;
    println!("wrote {}", path.display());
    println!(
        "|Y1| = {:.6}, |Y2| = {:.6}, |Γ| = {:.6}",
        copy.area(Phase::Y1),
        copy.area(Phase::Y2),
        copy.gamma_length()
    );
    let (_, a) = homogenize(&cell, &DiffusionSpec::default())?;
    let (_, b) = homogenize(&copy, &DiffusionSpec::default())?;
    println!("D11 original {:.12}, reloaded {:.12}", a.entries[0][0], b.entries[0][0]);
    Ok(())
}
