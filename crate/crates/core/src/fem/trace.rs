//! Trace inequality for perforated domains:
//! `‖u‖_{L²(Γε)} ≤ C(θ) ε^{-1/2} ‖u‖_{L²(Ωε)} + θ ε^{1/2} ‖∇u‖_{L²(Ωε)}`.
//!
//! Only existence of `C(θ)` is known, so the constant is calibrated on a
//! family of random fields and then used as a diagnostic threshold.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::norms::NormOperators;
use crate::error::Result;
use crate::geometry::{build_epsilon_tiling, CellMesh, Phase, SideMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceInequality {
    pub theta: f64,
    pub constant: f64,
}

impl TraceInequality {
    pub fn new(theta: f64, constant: f64) -> Self {
        assert!(theta > 0.0, "θ must be positive");
        Self { theta, constant }
    }

    pub fn check(&self, ops: &NormOperators, u: &[f64]) -> TraceReport {
        let eps = ops.epsilon;
        let lhs = ops.surface_l2(u);
        let rhs = self.constant * ops.bulk_l2(u) / eps.sqrt() + self.theta * eps.sqrt() * ops.bulk_gradient(u);
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        TraceReport {
            lhs,
            rhs,
            ratio,
            holds: lhs <= rhs * (1.0 + 1e-12),
        }
    }

    /// Smallest `C` for which the inequality holds on `u` (zero if the
    /// gradient term alone suffices).
    pub fn required_constant(theta: f64, ops: &NormOperators, u: &[f64]) -> f64 {
        let eps = ops.epsilon;
        let lhs = ops.surface_l2(u);
        let l2 = ops.bulk_l2(u);
        if l2 == 0.0 {
            return 0.0;
        }
        ((lhs - theta * eps.sqrt() * ops.bulk_gradient(u)) * eps.sqrt() / l2).max(0.0)
    }
}

/// Smooth random P1 field: a slow Fourier sum in `x`, an oscillating
/// periodic profile in `x/ε`, and a small nodal perturbation.
pub fn random_field(side: &SideMesh, rng: &mut impl Rng) -> Vec<f64> {
    let slow: Vec<([f64; 2], f64, f64)> = (0..4)
        .map(|_| {
            let m = [rng.gen_range(-3i32..=3) as f64, rng.gen_range(-3i32..=3) as f64];
            (m, rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let fast: Vec<([f64; 2], f64, f64)> = (0..3)
        .map(|_| {
            let m = [rng.gen_range(-2i32..=2) as f64, rng.gen_range(-2i32..=2) as f64];
            (m, rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let mean: f64 = rng.gen_range(-1.0..1.0);
    let noise: f64 = rng.gen_range(0.0..0.1);
    let eps = side.epsilon;
    side.vertices
        .iter()
        .map(|&x| {
            let mut v = mean;
            for (m, phase, a) in &slow {
                v += a * (2.0 * PI * (m[0] * x[0] + m[1] * x[1]) + phase).cos();
            }
            for (m, phase, a) in &fast {
                v += a * (2.0 * PI * (m[0] * x[0] + m[1] * x[1]) / eps + phase).cos();
            }
            v + noise * rng.gen_range(-1.0..1.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceCalibration {
    pub inequality: TraceInequality,
    /// Largest required constant per `(n, phase)` sample set.
    pub observed: Vec<(usize, Phase, f64)>,
}

/// Calibrates `C(θ)` as 1.1 × the largest constant required by
/// `fields` random fields per side and per `n` in `ns` (ε = 1/n).
pub fn calibrate_trace_constant(
    cell: &Arc<CellMesh>,
    theta: f64,
    ns: &[usize],
    fields: usize,
    seed: u64,
) -> Result<TraceCalibration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = Vec::new();
    let mut max_required = 0.0f64;
    for &n in ns {
        let tiling = build_epsilon_tiling(cell.clone(), n)?;
        for phase in Phase::BOTH {
            let side = tiling.side(phase);
            let ops = NormOperators::new(side);
            let mut worst = TraceInequality::required_constant(theta, &ops, &vec![1.0; side.vertex_count()]);
            for _ in 0..fields {
                let u = random_field(side, &mut rng);
                worst = worst.max(TraceInequality::required_constant(theta, &ops, &u));
            }
            observed.push((n, phase, worst));
            max_required = max_required.max(worst);
        }
    }
    Ok(TraceCalibration {
        inequality: TraceInequality::new(theta, 1.1 * max_required),
        observed,
    })
}
