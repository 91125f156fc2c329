//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use whomog::cell::{homogenize, GOLDEN_D_HAT};
use whomog::fem::trace::random_field;
use whomog::fem::{DiffusionSpec, ReactionModel, ReactionSpec};
use whomog::geometry::{build_epsilon_tiling, CellMesh, Phase, Point, UnitCellGeometry};
use whomog::macroscopic::{
    run_macro, AveragedReactions, CellMeasures, MacroMesh, MacroProblem, MacroState, MacroStepper, TimeGrid,
};
use whomog::microscopic::{build_wentzell_system, micro_initial_state, InitialData, MicroStepper};
use whomog::two_scale::{
    convergence_sweep, identity_defects, nonlinear_compatibility_defect, ConvergenceReport, SweepConfig, MONOTONE_COLUMNS,
    MONOTONE_RATIO,
};

use common::{mms_error, order};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn unfolding_identities() -> Outcome {
    let start = Instant::now();
    let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.125).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut norm, mut grad) = (0.0f64, 0.0f64);
    for n in [2, 4, 8] {
        let tiling = build_epsilon_tiling(cell.clone(), n).unwrap();
        for _ in 0..50 {
            for phase in Phase::BOTH {
                let u = random_field(tiling.side(phase), &mut rng);
                let d = identity_defects(&tiling, phase, &u).unwrap();
                norm = norm.max(d.bulk_norm).max(d.surface_norm);
                grad = grad.max(d.bulk_gradient).max(d.surface_gradient);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        norm <= 1e-10 && grad <= 1e-12 && elapsed <= Duration::from_secs(30),
        format!("norm defect {norm:.2e} (≤ 1e-10), gradient defect {grad:.2e} (≤ 1e-12), {elapsed:.1?} (≤ 30 s)"),
    )
}

fn cell_certificate() -> Outcome {
    let start = Instant::now();
    let cell = CellMesh::build(&UnitCellGeometry::default(), 0.02).unwrap();
    let (_, d) = homogenize(&cell, &DiffusionSpec::default()).unwrap();
    let elapsed = start.elapsed();
    let e = d.entries;
    let symmetric = d.symmetry_defect <= 1e-10 * d.max_abs();
    let isotropy = (e[0][0] - e[1][1]).abs() / e[0][0];
    let golden = [e[0][0], e[1][1]].map(|v| (v - GOLDEN_D_HAT).abs() / GOLDEN_D_HAT);
    let passed = symmetric
        && isotropy <= 1e-4
        && d.min_eigenvalue > 0.0
        && golden.iter().all(|&g| g <= 0.02)
        && elapsed <= Duration::from_secs(60);
    outcome(
        passed,
        format!(
            "D̂ = [{:.8}, {:.1e}; {:.8}], isotropy {isotropy:.1e}, vs golden {:.2e}, λ_min {:.4}, {elapsed:.1?}",
            e[0][0], e[0][1], e[1][1], golden[0].max(golden[1]), d.min_eigenvalue
        ),
    )
}

fn conservation() -> Outcome {
    let (cell, tensor) = common::cell();
    let none = ReactionSpec::none();
    let dt = 1e-3;

    let tiling = Arc::new(build_epsilon_tiling(cell.clone(), 4).unwrap());
    let sys = build_wentzell_system(tiling, &DiffusionSpec::default()).unwrap();
    let data = InitialData {
        bulk: [
            Arc::new(|x: Point, y: Point| 1.0 + x[0] * x[1] + 0.3 * (6.0 * y[0]).sin()),
            Arc::new(|x: Point, y: Point| 2.0 - x[0] + 0.2 * y[1]),
        ],
        surface: None,
    };
    let mut state = micro_initial_state(&sys, &data).unwrap();
    let masses = |u1: &[f64], u2: &[f64]| {
        [(0, u1), (1, u2)].map(|(j, u)| sys.mass[j].bilinear_form(&vec![1.0; u.len()], u))
    };
    let micro0 = masses(&state.u1, &state.u2);
    let stepper = MicroStepper::new(&sys, &none, dt).unwrap();
    for _ in 0..500 {
        stepper.step(&mut state).unwrap();
    }
    let micro1 = masses(&state.u1, &state.u2);
    let micro_drift = (0..2).map(|j| ((micro1[j] - micro0[j]) / micro0[j]).abs()).fold(0.0, f64::max);

    let problem = MacroProblem {
        mesh: MacroMesh::new(32).unwrap(),
        tensor: *tensor,
        reactions: AveragedReactions::new(cell, none.clone()),
        source: None,
    };
    let u1 = problem.mesh.interpolate(|x| 1.0 + (3.0 * x[0]).cos() * x[1]);
    let u2 = problem.mesh.interpolate(|x| 0.5 + x[0] * x[0]);
    let mut macro_state = MacroState { t: 0.0, u1, u2 };
    let stepper = MacroStepper::new(&problem, dt).unwrap();
    let before = stepper.diagnostics(&macro_state);
    for _ in 0..500 {
        stepper.step(&mut macro_state).unwrap();
    }
    let after = stepper.diagnostics(&macro_state);
    let macro_drift = ((after.mass1 - before.mass1) / before.mass1)
        .abs()
        .max(((after.mass2 - before.mass2) / before.mass2).abs());
    outcome(
        micro_drift <= 1e-8 && macro_drift <= 1e-8,
        format!("micro drift {micro_drift:.2e}, macro drift {macro_drift:.2e} over 500 steps (≤ 1e-8)"),
    )
}

fn scalar_ode_oracle() -> Outcome {
    let (cell, tensor) = common::cell();
    let dt = 1e-3;
    let problem = MacroProblem {
        mesh: MacroMesh::new(4).unwrap(),
        tensor: *tensor,
        reactions: AveragedReactions::new(cell, ReactionSpec::from_model(ReactionModel::Linear { k1: 0.0, k2: 1.0 })),
        source: None,
    };
    let nv = problem.mesh.vertex_count();
    let grid = TimeGrid::new(dt, 1.0).unwrap();
    let times: Vec<f64> = (0..=grid.steps).map(|k| k as f64 * grid.dt).collect();
    let traj = run_macro(
        &problem,
        MacroState {
            t: 0.0,
            u1: vec![0.0; nv],
            u2: vec![1.0; nv],
        },
        &grid,
        &times,
    )
    .unwrap();
    let m = CellMeasures::from_cell(cell);
    let rate = m.y2 / (m.y2 + m.gamma);
    let err = traj
        .snapshots
        .iter()
        .flat_map(|s| s.u2.iter().map(move |&v| (v - (-rate * s.t).exp()).abs()))
        .fold(0.0, f64::max);
    outcome(err <= 2.0 * dt, format!("max error {err:.3e} over [0, 1] (≤ {:.1e})", 2.0 * dt))
}

fn manufactured_solution() -> Outcome {
    let spatial: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&n| {
            let h = 1.0 / n as f64;
            mms_error(n, h * h, 0.25)
        })
        .collect();
    let temporal: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| mms_error(128, dt, 0.5)).collect();
    let ps = [order(spatial[0], spatial[1]), order(spatial[1], spatial[2])];
    let pt = [order(temporal[0], temporal[1]), order(temporal[1], temporal[2])];
    outcome(
        ps.iter().all(|&p| p >= 1.9) && pt.iter().all(|&p| p >= 0.9),
        format!("spatial orders {:.3}/{:.3} (≥ 1.9), temporal orders {:.3}/{:.3} (≥ 0.9)", ps[0], ps[1], pt[0], pt[1]),
    )
}

fn sweep_monotone(report: &ConvergenceReport) -> Outcome {
    let bad = report.non_monotone(MONOTONE_RATIO);
    let worst = MONOTONE_COLUMNS
        .iter()
        .flat_map(|c| report.ratios(c))
        .fold(0.0, f64::max);
    let orders: Vec<String> = MONOTONE_COLUMNS
        .iter()
        .map(|c| format!("{c} {:.2}", report.empirical_order(c).unwrap_or(f64::NAN)))
        .collect();
    outcome(
        bad.is_empty(),
        format!(
            "largest ratio {worst:.3} (≤ {MONOTONE_RATIO}), p = {}, orders: {}",
            report.e2_exponent,
            orders.join(", ")
        ),
    )
}

fn apriori_uniformity(report: &ConvergenceReport) -> Outcome {
    let spread = report.hje_spread();
    outcome(
        spread.iter().all(|&s| s <= 2.0),
        format!("max/min ℍ-norm ratios {:.3}, {:.3} (≤ 2)", spread[0], spread[1]),
    )
}

fn shift_diagnostic(report: &ConvergenceReport) -> Outcome {
    let checks = report.shift_check();
    let worst = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    let lengths: Vec<String> = checks.iter().map(|(s, r)| format!("{:?}: {r:.2}", s.l)).collect();
    outcome(
        !checks.is_empty() && worst <= 1.0,
        format!(
            "C = {:.4}, lhs/(C·rhs) at smallest ε: {} (≤ 1)",
            report.shift_constant.unwrap_or(f64::NAN),
            lengths.join(", ")
        ),
    )
}

fn nonlinear_compatibility() -> Outcome {
    let (cell, _) = common::cell();
    let models = [
        ReactionModel::None,
        ReactionModel::Linear { k1: 0.5, k2: 2.0 },
        ReactionModel::Exchange { rate: 1.0 },
        ReactionModel::LogisticTruncated { r1: 1.0, r2: 3.0 },
        ReactionModel::ModulatedExchange { rate: 1.0, amplitude: 0.5 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for n in [2, 4, 8] {
        let tiling = build_epsilon_tiling(cell.clone(), n).unwrap();
        for model in models {
            let spec = ReactionSpec::from_model(model);
            for _ in 0..5 {
                let u1 = random_field(tiling.side(Phase::Y1), &mut rng);
                let u2 = random_field(tiling.side(Phase::Y2), &mut rng);
                worst = worst.max(nonlinear_compatibility_defect(&tiling, &spec, 0.3, &u1, &u2).unwrap());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max defect {worst:.2e} over the catalog (≤ 1e-12)"))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("[{}] criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    let plain: [(&str, fn() -> Outcome); 5] = [
        ("1 unfolding identities", unfolding_identities),
        ("2 cell-problem certificate", cell_certificate),
        ("3 conservation", conservation),
        ("4 scalar ODE oracle", scalar_ode_oracle),
        ("5 manufactured macro solution", manufactured_solution),
    ];
    for (name, f) in plain {
        report(name, guarded(f));
    }
    let start = Instant::now();
    let sweep = catch_unwind(|| convergence_sweep(&SweepConfig::default()));
    println!("  sweep ran for {:.1?}", start.elapsed());
    let swept: [(&str, fn(&ConvergenceReport) -> Outcome); 3] = [
        ("6 homogenization sweep", sweep_monotone),
        ("7 a priori uniformity", apriori_uniformity),
        ("8 shift diagnostic", shift_diagnostic),
    ];
    for (name, f) in swept {
        let o = match &sweep {
            Ok(Ok(r)) => guarded(|| f(r)),
            Ok(Err(e)) => outcome(false, format!("sweep failed: {e}")),
            Err(_) => outcome(false, "sweep panicked"),
        };
        report(name, o);
    }
    report("9 nonlinear compatibility", guarded(nonlinear_compatibility));

    let failed: Vec<&str> = results.iter().filter(|r| !r.1.passed).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
