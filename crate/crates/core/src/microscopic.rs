//! The ε-problem: bulk diffusion in Ω_ε¹ and Ω_ε², each with a dynamic
//! Wentzell condition on Γ_ε, coupled only through the interface rates.
//!
//! On side `j` the discrete weak form reads
//!
//! ```text
//! (M_b + εM_s) ∂ₜu + (K_b(Dʲ) + εK_s(D_Γʲ)) u = M_b fʲ(u) + εM_s hʲ(u¹, u²)
//! ```
//!
//! where the unknown is the bulk nodal vector and its interface values are
//! the trace. Coefficients and rates are evaluated at `y = frac(x/ε)`;
//! rates are interpolated nodally.

use std::sync::Arc;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::quadrature::trapezoid_l2;
use crate::fem::{
    assemble_bulk_mass, assemble_bulk_stiffness, assemble_side_surface_mass,
    assemble_side_surface_stiffness, DiffusionSpec, NormOperators, ReactionSpec, TraceInequality,
};
use crate::geometry::{EpsilonTiling, Phase, Point};
use crate::macroscopic::TimeGrid;
use crate::sparse::{pcg, CgSettings, SparseOperator};

/// Assembled operators of both sides on one tiling.
#[derive(Debug, Clone)]
pub struct WentzellSystem {
    pub tiling: Arc<EpsilonTiling>,
    pub epsilon: f64,
    /// `A_j = M_b + εM_s`
    pub mass: [SparseOperator; 2],
    /// `S_j = K_b(Dʲ) + εK_s(D_Γʲ)`
    pub stiffness: [SparseOperator; 2],
    pub bulk_mass: [SparseOperator; 2],
    /// `εM_s`
    pub surface_mass: [SparseOperator; 2],
    /// Reference-cell coordinate of every vertex.
    pub reference: [Vec<Point>; 2],
    pub norms: [NormOperators; 2],
}

pub fn build_wentzell_system(tiling: Arc<EpsilonTiling>, diffusion: &DiffusionSpec) -> Result<WentzellSystem> {
    let eps = tiling.epsilon;
    let mut parts = Vec::with_capacity(2);
    for phase in Phase::BOTH {
        let side = tiling.side(phase);
        let bulk_mass = assemble_bulk_mass(side, 1.0);
        let surface_mass = assemble_side_surface_mass(side, eps);
        let stiffness = assemble_bulk_stiffness(side, diffusion.bulk(phase), 1.0)?
            .linear_combination(1.0, &assemble_side_surface_stiffness(side, diffusion.surface(phase), eps)?, 1.0);
        let mass = bulk_mass.linear_combination(1.0, &surface_mass, 1.0);
        let local = tiling.cell.side(phase);
        let mut reference = vec![[0.0; 2]; side.vertex_count()];
        for c in 0..tiling.cell_count() {
            for (p, &g) in tiling.cell_map(phase, c).iter().enumerate() {
                reference[g] = local.vertices[p];
            }
        }
        parts.push((mass, stiffness, bulk_mass, surface_mass, reference, NormOperators::new(side)));
    }
    let (m2, s2, b2, sm2, r2, n2) = parts.pop().expect("two sides");
    let (m1, s1, b1, sm1, r1, n1) = parts.pop().expect("two sides");
    Ok(WentzellSystem {
        tiling,
        epsilon: eps,
        mass: [m1, m2],
        stiffness: [s1, s2],
        bulk_mass: [b1, b2],
        surface_mass: [sm1, sm2],
        reference: [r1, r2],
        norms: [n1, n2],
    })
}

impl WentzellSystem {
    pub fn interface_nodes(&self, phase: Phase) -> &[usize] {
        &self.tiling.side(phase).interface_nodes
    }

    pub fn vertices(&self, phase: Phase) -> &[Point] {
        &self.tiling.side(phase).vertices
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub t: f64,
    pub epsilon: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl MicroState {
    pub fn field(&self, phase: Phase) -> &[f64] {
        match phase {
            Phase::Y1 => &self.u1,
            Phase::Y2 => &self.u2,
        }
    }

    /// Trace of side `phase` in interface order.
    pub fn trace(&self, sys: &WentzellSystem, phase: Phase) -> Vec<f64> {
        let u = self.field(phase);
        sys.interface_nodes(phase).iter().map(|&v| u[v]).collect()
    }
}

/// Profile `U(x, y)` evaluated at `y = x/ε` (mod 1).
pub type Profile = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;

/// Initial data per side. Without surface profiles the surface data are the
/// traces of the bulk data; otherwise the pair is projected onto the
/// trace-consistent space in the ε-weighted inner product.
#[derive(Clone)]
pub struct InitialData {
    pub bulk: [Profile; 2],
    pub surface: Option<[Profile; 2]>,
}

pub fn micro_initial_state(sys: &WentzellSystem, data: &InitialData) -> Result<MicroState> {
    let mut fields = Vec::with_capacity(2);
    for phase in Phase::BOTH {
        let j = phase.index();
        let x = sys.vertices(phase);
        let y = &sys.reference[j];
        let bulk: Vec<f64> = (0..x.len()).map(|i| (data.bulk[j])(x[i], y[i])).collect();
        let u = match &data.surface {
            None => bulk,
            Some(surface) => {
                let mut s = vec![0.0; x.len()];
                for &v in sys.interface_nodes(phase) {
                    s[v] = (surface[j])(x[v], y[v]);
                }
                let rhs: Vec<f64> = sys.bulk_mass[j]
                    .mul_vec(&bulk)
                    .iter()
                    .zip(sys.surface_mass[j].mul_vec(&s))
                    .map(|(a, b)| a + b)
                    .collect();
                let mut u = bulk;
                pcg(&sys.mass[j], &rhs, &mut u, &CgSettings { rel_tol: 1e-12, ..CgSettings::default() })?;
                u
            }
        };
        fields.push(u);
    }
    let u2 = fields.pop().expect("two sides");
    let u1 = fields.pop().expect("two sides");
    Ok(MicroState {
        t: 0.0,
        epsilon: sys.epsilon,
        u1,
        u2,
    })
}

pub struct MicroStepper<'a> {
    sys: &'a WentzellSystem,
    reactions: &'a ReactionSpec,
    pub dt: f64,
    system1: SparseOperator,
    blocks2: Vec<(std::ops::Range<usize>, SparseOperator)>,
    pub cg: CgSettings,
    pub stability_warning: bool,
}

impl<'a> MicroStepper<'a> {
    pub fn new(sys: &'a WentzellSystem, reactions: &'a ReactionSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::validation("micro.dt", format!("time step must be positive, got {dt}")));
        }
        let system1 = sys.mass[0].linear_combination(1.0, &sys.stiffness[0], dt);
        let system2 = sys.mass[1].linear_combination(1.0, &sys.stiffness[1], dt);
        let blocks2 = (0..sys.tiling.cell_count())
            .map(|c| {
                let range = sys.tiling.inclusion_range(c);
                let block = system2.principal_block(range.clone());
                (range, block)
            })
            .collect();
        // explicit bulk and interface rates each contribute at most L
        let l_eff = 2.0 * reactions.lipschitz_bound;
        let stability_warning = dt * l_eff >= 1.0;
        if stability_warning {
            warn!("micro time step {dt} violates dt·L_eff < 1 (L_eff = {l_eff})");
        }
        Ok(Self {
            sys,
            reactions,
            dt,
            system1,
            blocks2,
            cg: CgSettings::default(),
            stability_warning,
        })
    }

    fn rhs(&self, state: &MicroState, phase: Phase) -> Vec<f64> {
        let sys = self.sys;
        let j = phase.index();
        let u = state.field(phase);
        let y = &sys.reference[j];
        let t = state.t;
        let f: Vec<f64> = u
            .par_iter()
            .zip(y.par_iter())
            .map(|(&z, &yy)| self.reactions.bulk_rate(phase, t, yy, z))
            .collect();
        let mut h = vec![0.0; u.len()];
        let (i1, i2) = (sys.interface_nodes(Phase::Y1), sys.interface_nodes(Phase::Y2));
        let own = sys.interface_nodes(phase);
        for k in 0..own.len() {
            let (z1, z2) = (state.u1[i1[k]], state.u2[i2[k]]);
            let v = own[k];
            h[v] = self.reactions.surface_rate(phase, t, y[v], z1, z2);
        }
        let au = sys.mass[j].mul_vec(u);
        let mf = sys.bulk_mass[j].mul_vec(&f);
        let mh = sys.surface_mass[j].mul_vec(&h);
        (0..u.len()).map(|i| au[i] + self.dt * (mf[i] + mh[i])).collect()
    }

    /// One IMEX step; both sides see the interface data of the old state.
    pub fn step(&self, state: &mut MicroState) -> Result<()> {
        let b1 = self.rhs(state, Phase::Y1);
        let b2 = self.rhs(state, Phase::Y2);
        let mut u1 = state.u1.clone();
        pcg(&self.system1, &b1, &mut u1, &self.cg)?;
        let solved: Result<Vec<Vec<f64>>> = self
            .blocks2
            .par_iter()
            .map(|(range, block)| {
                let mut x = state.u2[range.clone()].to_vec();
                pcg(block, &b2[range.clone()], &mut x, &self.cg)?;
                Ok(x)
            })
            .collect();
        let mut u2 = Vec::with_capacity(state.u2.len());
        for part in solved? {
            u2.extend(part);
        }
        if u1.iter().chain(&u2).any(|v| !v.is_finite()) {
            return Err(Error::SolverDivergence {
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        state.u1 = u1;
        state.u2 = u2;
        state.t += self.dt;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroDiagnostics {
    pub t: f64,
    /// `∫_{Ωε¹} u¹ + ε∫_{Γε} u¹`
    pub mass1: f64,
    pub mass2: f64,
    pub hje_norm1: f64,
    pub hje_norm2: f64,
    /// Largest trace-inequality ratio of the two sides (NaN when unchecked).
    pub trace_check_ratio: f64,
}

pub fn micro_diagnostics(sys: &WentzellSystem, state: &MicroState, trace: Option<&TraceInequality>) -> MicroDiagnostics {
    let mass = |j: usize, u: &[f64]| {
        let ones = vec![1.0; u.len()];
        sys.mass[j].bilinear_form(&ones, u)
    };
    let ratio = match trace {
        Some(ineq) => ineq
            .check(&sys.norms[0], &state.u1)
            .ratio
            .max(ineq.check(&sys.norms[1], &state.u2).ratio),
        None => f64::NAN,
    };
    MicroDiagnostics {
        t: state.t,
        mass1: mass(0, &state.u1),
        mass2: mass(1, &state.u2),
        hje_norm1: sys.norms[0].h_norm(&state.u1),
        hje_norm2: sys.norms[1].h_norm(&state.u2),
        trace_check_ratio: ratio,
    }
}

#[derive(Debug, Clone)]
pub struct MicroTrajectory {
    pub snapshots: Vec<MicroState>,
    pub diagnostics: Vec<MicroDiagnostics>,
    /// `‖uʲ‖_{L²((0,T), ℍ_{j,ε})}` by the trapezoid rule on the snapshots.
    pub hje_time_norms: [f64; 2],
    /// `(Σₙ dt ‖∇uʲ(tₙ)‖²)^{1/2}` over every step: the natural L²(0,T)
    /// norm of the implicit scheme, which also sees initial layers shorter
    /// than the snapshot spacing.
    pub gradient_step_norms: [f64; 2],
    pub stability_warning: bool,
}

pub fn micro_run(
    sys: &WentzellSystem,
    reactions: &ReactionSpec,
    initial: MicroState,
    grid: &TimeGrid,
    output_times: &[f64],
    trace: Option<&TraceInequality>,
) -> Result<MicroTrajectory> {
    let stepper = MicroStepper::new(sys, reactions, grid.dt)?;
    let outputs = grid.output_steps(output_times)?;
    let mut state = initial;
    let mut snapshots = Vec::with_capacity(outputs.len());
    let mut diagnostics = Vec::with_capacity(grid.steps + 1);
    diagnostics.push(micro_diagnostics(sys, &state, trace));
    let mut gradient_sums = [0.0; 2];
    for step in 0..=grid.steps {
        for &k in &outputs {
            if k == step {
                snapshots.push(state.clone());
            }
        }
        if step == grid.steps {
            break;
        }
        stepper.step(&mut state)?;
        for (j, sum) in gradient_sums.iter_mut().enumerate() {
            *sum += grid.dt * sys.norms[j].bulk_gradient(state.field(Phase::BOTH[j])).powi(2);
        }
        diagnostics.push(micro_diagnostics(sys, &state, trace));
    }
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let hje_time_norms = [0, 1].map(|j| {
        let squares: Vec<f64> = snapshots
            .iter()
            .map(|s| sys.norms[j].h_norm(s.field(Phase::BOTH[j])).powi(2))
            .collect();
        trapezoid_l2(&times, &squares)
    });
    Ok(MicroTrajectory {
        snapshots,
        diagnostics,
        hje_time_norms,
        gradient_step_norms: gradient_sums.map(f64::sqrt),
        stability_warning: stepper.stability_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::ReactionModel;
    use crate::geometry::{build_epsilon_tiling, CellMesh, UnitCellGeometry};

    fn system(n: usize, diffusion: &DiffusionSpec) -> WentzellSystem {
        let cell = Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.1).unwrap());
        let tiling = Arc::new(build_epsilon_tiling(cell, n).unwrap());
        build_wentzell_system(tiling, diffusion).unwrap()
    }

    fn constant(c: f64) -> Profile {
        Arc::new(move |_, _| c)
    }

    #[test]
    fn constants_stay_constant_without_reactions() {
        let sys = system(2, &DiffusionSpec::default());
        let data = InitialData {
            bulk: [constant(0.4), constant(-2.0)],
            surface: None,
        };
        let mut s = micro_initial_state(&sys, &data).unwrap();
        let none = ReactionSpec::none();
        let stepper = MicroStepper::new(&sys, &none, 1e-2).unwrap();
        stepper.step(&mut s).unwrap();
        assert!(s.u1.iter().all(|&v| (v - 0.4).abs() < 1e-12));
        assert!(s.u2.iter().all(|&v| (v + 2.0).abs() < 1e-12));
    }

    #[test]
    fn single_cell_operators_match_the_cell_assembly() {
        let diffusion = DiffusionSpec::default();
        let sys = system(1, &diffusion);
        let side = sys.tiling.cell.side(Phase::Y2);
        let direct = assemble_bulk_stiffness(side, &diffusion.d2, 1.0)
            .unwrap()
            .linear_combination(1.0, &assemble_side_surface_stiffness(side, &diffusion.dg2, 1.0).unwrap(), 1.0);
        assert_eq!(direct, sys.stiffness[1]);
    }

    #[test]
    fn surface_mass_trace_is_epsilon_independent() {
        let mut totals = Vec::new();
        for n in [1, 2, 4] {
            let sys = system(n, &DiffusionSpec::default());
            let ones = vec![1.0; sys.surface_mass[0].dim()];
            totals.push(sys.surface_mass[0].quadratic_form(&ones));
        }
        for t in &totals {
            assert!((t - totals[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn doubled_diffusion_doubles_the_stiffness() {
        let d = DiffusionSpec::default();
        let (a, b) = (system(2, &d), system(2, &d.scaled(2.0)));
        for j in 0..2 {
            for (x, y) in a.stiffness[j].values().iter().zip(b.stiffness[j].values()) {
                assert!((2.0 * x - y).abs() < 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn traces_evolve_independently_without_exchange() {
        let sys = system(2, &DiffusionSpec::default());
        let data = InitialData {
            bulk: [constant(1.0), constant(0.0)],
            surface: None,
        };
        let s0 = micro_initial_state(&sys, &data).unwrap();
        let none = ReactionSpec::none();
        let grid = TimeGrid::new(1e-2, 0.1).unwrap();
        let traj = micro_run(&sys, &none, s0, &grid, &[0.1], None).unwrap();
        let last = &traj.snapshots[0];
        let (t1, t2) = (last.trace(&sys, Phase::Y1), last.trace(&sys, Phase::Y2));
        assert!(t1.iter().all(|&v| (v - 1.0).abs() < 1e-10));
        assert!(t2.iter().all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn weighted_energy_decays_without_reactions() {
        let sys = system(2, &DiffusionSpec::default());
        let data = InitialData {
            bulk: [
                Arc::new(|x: Point, _| (7.0 * x[0]).sin() + x[1]),
                Arc::new(|x: Point, y: Point| x[0] * y[1]),
            ],
            surface: None,
        };
        let mut s = micro_initial_state(&sys, &data).unwrap();
        let none = ReactionSpec::none();
        let stepper = MicroStepper::new(&sys, &none, 5e-3).unwrap();
        let energy = |s: &MicroState| sys.norms[0].l_norm(&s.u1).powi(2) + sys.norms[1].l_norm(&s.u2).powi(2);
        let mut previous = energy(&s);
        for _ in 0..20 {
            stepper.step(&mut s).unwrap();
            let e = energy(&s);
            assert!(e <= previous * (1.0 + 1e-12));
            previous = e;
        }
    }

    #[test]
    fn exchange_preserves_the_total_weighted_mass() {
        let sys = system(2, &DiffusionSpec::default());
        let data = InitialData {
            bulk: [constant(1.0), constant(0.0)],
            surface: None,
        };
        let s0 = micro_initial_state(&sys, &data).unwrap();
        let spec = ReactionSpec::from_model(ReactionModel::Exchange { rate: 1.0 });
        let grid = TimeGrid::new(1e-2, 0.2).unwrap();
        let traj = micro_run(&sys, &spec, s0, &grid, &[0.0, 0.2], None).unwrap();
        let total = |d: &MicroDiagnostics| d.mass1 + d.mass2;
        let (a, b) = (total(&traj.diagnostics[0]), total(traj.diagnostics.last().unwrap()));
        assert!((a - b).abs() < 1e-9 * a);
        assert!(traj.diagnostics.last().unwrap().mass2 > 0.0);
    }

    #[test]
    fn projected_initial_data_respects_the_weighted_mean() {
        let sys = system(2, &DiffusionSpec::default());
        let data = InitialData {
            bulk: [constant(1.0), constant(1.0)],
            surface: Some([constant(0.0), constant(3.0)]),
        };
        let s = micro_initial_state(&sys, &data).unwrap();
        for j in 0..2 {
            let ones = vec![1.0; sys.mass[j].dim()];
            let u = s.field(Phase::BOTH[j]);
            let expected = sys.bulk_mass[j].quadratic_form(&ones) + [0.0, 3.0][j] * sys.surface_mass[j].quadratic_form(&ones);
            assert!((sys.mass[j].bilinear_form(&ones, u) - expected).abs() < 1e-9);
        }
    }
}
