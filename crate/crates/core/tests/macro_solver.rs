mod common;

use std::sync::Arc;

use whomog::fem::{ReactionModel, ReactionSpec};
use whomog::macroscopic::{run_macro, AveragedReactions, CellMeasures, MacroMesh, MacroProblem, MacroState, TimeGrid};

use common::{mms_error, order};

fn problem(n: usize, model: ReactionModel) -> MacroProblem {
    let (cell, tensor) = common::cell();
    MacroProblem {
        mesh: MacroMesh::new(n).unwrap(),
        tensor: *tensor,
        reactions: AveragedReactions::new(cell, ReactionSpec::from_model(model)),
        source: None,
    }
}

#[test]
fn manufactured_solution_converges_in_space() {
    let e: Vec<f64> = [8usize, 16, 32].iter().map(|&n| mms_error(n, 1.0 / (n * n) as f64, 0.1)).collect();
    assert!(order(e[0], e[1]) >= 1.8 && order(e[1], e[2]) >= 1.8, "{e:?}");
}

#[test]
fn richardson_ratio_in_time_is_first_order() {
    let (cell, tensor) = common::cell();
    let run = |dt: f64| {
        let p = MacroProblem {
            mesh: MacroMesh::new(16).unwrap(),
            tensor: *tensor,
            reactions: AveragedReactions::new(cell, ReactionSpec::from_model(ReactionModel::Exchange { rate: 1.0 })),
            source: None,
        };
        let u1 = p.mesh.interpolate(|x| 1.0 + x[0] * x[1]);
        let u2 = p.mesh.interpolate(|x| (3.0 * x[1]).sin());
        let grid = TimeGrid::new(dt, 0.2).unwrap();
        let traj = run_macro(&p, MacroState { t: 0.0, u1, u2 }, &grid, &[0.2]).unwrap();
        traj.snapshots.into_iter().next().unwrap()
    };
    let s = [8e-3, 4e-3, 2e-3].map(run);
    let diff = |a: &MacroState, b: &MacroState| {
        a.u1.iter().zip(&b.u1).chain(a.u2.iter().zip(&b.u2)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let ratio = diff(&s[0], &s[1]) / diff(&s[1], &s[2]);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn spatially_constant_decay_follows_the_ode() {
    let p = problem(4, ReactionModel::Linear { k1: 1.0, k2: 0.5 });
    let m = CellMeasures::from_cell(common::cell().0.as_ref());
    let nv = p.mesh.vertex_count();
    let dt = 1e-3;
    let grid = TimeGrid::new(dt, 1.0).unwrap();
    let init = MacroState { t: 0.0, u1: vec![2.0; nv], u2: vec![1.0; nv] };
    let traj = run_macro(&p, init, &grid, &[1.0]).unwrap();
    let last = &traj.snapshots[0];
    let r1 = m.y1 / (m.y1 + m.gamma);
    let r2 = 0.5 * m.y2 / (m.y2 + m.gamma);
    for (&a, &b) in last.u1.iter().zip(&last.u2) {
        assert!((a - 2.0 * (-r1).exp()).abs() <= 2.0 * dt);
        assert!((b - (-r2).exp()).abs() <= 2.0 * dt);
    }
}

#[test]
fn exchange_conserves_weighted_mass() {
    let p = problem(8, ReactionModel::Exchange { rate: 2.0 });
    let u1 = p.mesh.interpolate(|x| 1.0 + x[0]);
    let u2 = p.mesh.interpolate(|x| x[1] * x[1]);
    let grid = TimeGrid::new(1e-3, 0.3).unwrap();
    let traj = run_macro(&p, MacroState { t: 0.0, u1, u2 }, &grid, &[0.3]).unwrap();
    let total = |d: &whomog::macroscopic::MacroDiagnostics| d.mass1 + d.mass2;
    let (first, last) = (traj.diagnostics.first().unwrap(), traj.diagnostics.last().unwrap());
    let drift = ((total(last) - total(first)) / total(first)).abs();
    assert!(drift <= 1e-8, "relative drift {drift:e}");
    assert!((last.mass1 - first.mass1).abs() > 1e-3, "exchange should move mass");
}

#[test]
fn zero_final_time_echoes_the_initial_state() {
    let p = problem(8, ReactionModel::Exchange { rate: 1.0 });
    let u1 = p.mesh.interpolate(|x| x[0] - x[1]);
    let u2 = p.mesh.interpolate(|x| 0.5 * x[0]);
    let init = MacroState { t: 0.0, u1, u2 };
    let grid = TimeGrid::new(1e-3, 0.0).unwrap();
    let traj = run_macro(&p, init.clone(), &grid, &[0.0]).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.snapshots[0].u1, init.u1);
    assert_eq!(traj.snapshots[0].u2, init.u2);
}

#[test]
fn source_term_is_applied() {
    let mut p = problem(4, ReactionModel::None);
    p.source = Some(Arc::new(|_, _| 1.0));
    let nv = p.mesh.vertex_count();
    let grid = TimeGrid::new(1e-2, 0.5).unwrap();
    let traj = run_macro(&p, MacroState { t: 0.0, u1: vec![0.0; nv], u2: vec![0.0; nv] }, &grid, &[0.5]).unwrap();
    let w1 = p.measures().y1 + p.measures().gamma;
    for &v in &traj.snapshots[0].u1 {
        assert!((v - 0.5 / w1).abs() <= 1e-8, "{v}");
    }
}

#[test]
fn invalid_time_grids_are_rejected() {
    assert!(TimeGrid::new(0.0, 1.0).is_err());
    assert!(TimeGrid::new(1e-3, -1.0).is_err());
    let grid = TimeGrid::new(1e-3, 0.5).unwrap();
    assert!(grid.output_steps(&[0.6]).is_err());
}
