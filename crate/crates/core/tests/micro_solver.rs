use std::sync::Arc;

use whomog::fem::{DiffusionSpec, ReactionModel, ReactionSpec};
use whomog::geometry::{build_epsilon_tiling, CellMesh, Phase, Point, UnitCellGeometry};
use whomog::macroscopic::TimeGrid;
use whomog::microscopic::{build_wentzell_system, micro_initial_state, micro_run, InitialData, WentzellSystem};

fn system_with(n: usize, diffusion: &DiffusionSpec) -> WentzellSystem {
    let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.125).unwrap());
    let tiling = Arc::new(build_epsilon_tiling(cell, n).unwrap());
    build_wentzell_system(tiling, diffusion).unwrap()
}

fn system(n: usize) -> WentzellSystem {
    system_with(n, &DiffusionSpec::default())
}

fn constant(a: f64, b: f64) -> InitialData {
    InitialData {
        bulk: [Arc::new(move |_: Point, _: Point| a), Arc::new(move |_: Point, _: Point| b)],
        surface: None,
    }
}

fn total(op: &whomog::sparse::SparseOperator, n: usize) -> f64 {
    op.bilinear_form(&vec![1.0; n], &vec![1.0; n])
}

/// With fast diffusion the compartments stay nearly uniform and exchange
/// through the interface like two well-mixed tanks.
#[test]
fn fast_diffusion_follows_the_two_compartment_ode() {
    let sys = system_with(1, &DiffusionSpec::isotropic(1e4, 1e4, 1e4, 1e4));
    let rate = 1.5;
    let spec = ReactionSpec::from_model(ReactionModel::Exchange { rate });
    let n = [sys.vertices(Phase::Y1).len(), sys.vertices(Phase::Y2).len()];
    let w = [total(&sys.mass[0], n[0]), total(&sys.mass[1], n[1])];
    let s = total(&sys.surface_mass[0], n[0]);
    let lambda = rate * s * (1.0 / w[0] + 1.0 / w[1]);
    let dt = 1e-3;
    let grid = TimeGrid::new(dt, 1.0).unwrap();
    let init = micro_initial_state(&sys, &constant(2.0, 0.0)).unwrap();
    let traj = micro_run(&sys, &spec, init, &grid, &[1.0], None).unwrap();
    let last = &traj.snapshots[0];
    let mean = 2.0 * w[0] / (w[0] + w[1]);
    let gap = 2.0 * (-lambda).exp();
    let expected = [mean + gap * w[1] / (w[0] + w[1]), mean - gap * w[0] / (w[0] + w[1])];
    for (u, e) in [(&last.u1, expected[0]), (&last.u2, expected[1])] {
        for &v in u {
            assert!((v - e).abs() <= 2.0 * dt, "{v} vs {e}");
        }
    }
}

#[test]
fn zero_final_time_echoes_the_initial_state() {
    let sys = system(2);
    let data = InitialData {
        bulk: [Arc::new(|x: Point, y: Point| x[0] + y[1]), Arc::new(|x: Point, _| x[1])],
        surface: None,
    };
    let init = micro_initial_state(&sys, &data).unwrap();
    let grid = TimeGrid::new(1e-3, 0.0).unwrap();
    let traj = micro_run(&sys, &ReactionSpec::none(), init.clone(), &grid, &[0.0], None).unwrap();
    assert_eq!(traj.snapshots[0].u1, init.u1);
    assert_eq!(traj.snapshots[0].u2, init.u2);
}

#[test]
fn halving_the_time_step_halves_the_difference() {
    let sys = system(2);
    let spec = ReactionSpec::from_model(ReactionModel::Exchange { rate: 1.0 });
    let data = InitialData {
        bulk: [Arc::new(|x: Point, _| 1.0 + x[0] * x[1]), Arc::new(|x: Point, y: Point| x[0] + 0.2 * y[0])],
        surface: None,
    };
    let run = |dt: f64| {
        let init = micro_initial_state(&sys, &data).unwrap();
        let grid = TimeGrid::new(dt, 0.1).unwrap();
        micro_run(&sys, &spec, init, &grid, &[0.1], None).unwrap().snapshots.pop().unwrap()
    };
    let s = [4e-3, 2e-3, 1e-3].map(run);
    let diff = |a: &whomog::microscopic::MicroState, b: &whomog::microscopic::MicroState| {
        a.u1.iter().zip(&b.u1).chain(a.u2.iter().zip(&b.u2)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let ratio = diff(&s[0], &s[1]) / diff(&s[1], &s[2]);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn operators_are_symmetric_and_masses_positive() {
    let sys = system(4);
    for j in 0..2 {
        assert!(sys.mass[j].symmetry_defect() <= 1e-12);
        assert!(sys.stiffness[j].symmetry_defect() <= 1e-12);
    }
    assert!((sys.epsilon - 0.25).abs() < 1e-15);
}

#[test]
fn nonpositive_time_steps_are_rejected() {
    let sys = system(1);
    let spec = ReactionSpec::none();
    assert!(whomog::microscopic::MicroStepper::new(&sys, &spec, 0.0).is_err());
    assert!(whomog::microscopic::MicroStepper::new(&sys, &spec, f64::NAN).is_err());
}
