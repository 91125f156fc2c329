//! Micro solutions at ε = 1/2, 1/4, 1/8 against the homogenized limit.
//!
//! `cargo run --release --example convergence_sweep` (about a minute)

use whomog::two_scale::{convergence_sweep, SweepConfig, SweepRow, MONOTONE_COLUMNS};

fn main() -> whomog::Result<()> {
    let report = convergence_sweep(&SweepConfig::default())?;
    println!("{}", SweepRow::COLUMNS.map(|c| format!("{c:>11}")).join(""));
    for row in &report.rows {
        println!("{}", row.values().map(|v| format!("{v:>11.3e}")).join(""));
    }
    for c in MONOTONE_COLUMNS {
        println!("{c:>11}: order {:.2}", report.empirical_order(c).unwrap_or(f64::NAN));
    }
    for (shift, ratio) in report.shift_check() {
        println!("shift {:?}: lhs/(C·rhs) = {ratio:.3}", shift.l);
    }
    if let Some(e) = report.monotonicity_error() {
        println!("warning: {e}");
    }
    Ok(())
}
