//! Homogenized limit system on Ω = (0,1)²:
//!
//! ```text
//! (|Y₁| + |Γ|) ∂ₜu¹ − ∇·(D̂¹∇u¹) = F¹(t, u¹) + H¹(t, u¹, u²),   D̂¹∇u¹·ν = 0 on ∂Ω
//! (|Y₂| + |Γ|) ∂ₜu² = F²(t, u²) + H²(t, u¹, u²)
//! ```
//!
//! with `Fʲ` the cell averages of `fʲ` over `Y_j` and `Hʲ` those of `hʲ`
//! over Γ. Diffusion is implicit, reactions explicit.

use std::fmt;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;

use crate::cell::EffectiveTensor;
use crate::error::{Error, Result};
use crate::fem::quadrature::DUNAVANT6;
use crate::fem::{assemble_bulk_mass, assemble_bulk_stiffness, ReactionSpec, TensorField};
use crate::geometry::{CellMesh, Phase, Point, SideMesh, TriangleMesh};
use crate::sparse::{pcg, CgSettings, SparseOperator};

/// Structured triangulation of Ω with `n` intervals per side.
#[derive(Debug, Clone)]
pub struct MacroMesh {
    pub n: usize,
    pub side: SideMesh,
}

impl MacroMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("macro.h", "the macro mesh needs at least one interval"));
        }
        let mesh = TriangleMesh::unit_square(n);
        let count = mesh.vertices.len();
        Ok(Self {
            n,
            side: SideMesh {
                phase: Phase::Y1,
                epsilon: 1.0,
                vertices: mesh.vertices,
                triangles: mesh.triangles,
                surface_edges: Vec::new(),
                interface_nodes: Vec::new(),
                periodic_master: (0..count).collect(),
            },
        })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn vertex_count(&self) -> usize {
        self.side.vertex_count()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.side.vertices
    }

    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.side.vertices.iter().map(|&x| f(x)).collect()
    }

    fn locate(&self, x: Point) -> (usize, usize, f64, f64) {
        let n = self.n;
        let sx = (x[0] * n as f64).clamp(0.0, n as f64);
        let sy = (x[1] * n as f64).clamp(0.0, n as f64);
        let i = (sx.floor() as usize).min(n - 1);
        let j = (sy.floor() as usize).min(n - 1);
        (i, j, sx - i as f64, sy - j as f64)
    }

    fn corner_values(&self, u: &[f64], i: usize, j: usize) -> [f64; 4] {
        let id = |a: usize, b: usize| b * (self.n + 1) + a;
        [u[id(i, j)], u[id(i + 1, j)], u[id(i + 1, j + 1)], u[id(i, j + 1)]]
    }

    /// P1 interpolant of the nodal field `u` at `x` (clamped into Ω).
    pub fn eval(&self, u: &[f64], x: Point) -> f64 {
        let (i, j, s, t) = self.locate(x);
        let [u00, u10, u11, u01] = self.corner_values(u, i, j);
        if s >= t {
            u00 + s * (u10 - u00) + t * (u11 - u10)
        } else {
            u00 + s * (u11 - u01) + t * (u01 - u00)
        }
    }

    /// Gradient of the P1 interpolant on the triangle containing `x`.
    pub fn grad(&self, u: &[f64], x: Point) -> Point {
        let (i, j, s, t) = self.locate(x);
        let [u00, u10, u11, u01] = self.corner_values(u, i, j);
        let n = self.n as f64;
        if s >= t {
            [n * (u10 - u00), n * (u11 - u10)]
        } else {
            [n * (u11 - u01), n * (u01 - u00)]
        }
    }

    /// `‖u_h − exact‖_{L²(Ω)}` by six-point quadrature.
    pub fn l2_error(&self, u: &[f64], exact: impl Fn(Point) -> f64 + Sync) -> f64 {
        self.side
            .triangles
            .par_iter()
            .map(|&[a, b, c]| {
                let p = [self.side.vertices[a], self.side.vertices[b], self.side.vertices[c]];
                let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
                DUNAVANT6
                    .iter()
                    .map(|(l, w)| {
                        let x = [
                            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                        ];
                        let uh = l[0] * u[a] + l[1] * u[b] + l[2] * u[c];
                        w * area * (uh - exact(x)).powi(2)
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            .sqrt()
    }
}

/// `|Y₁|, |Y₂|, |Γ|` of the meshed cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMeasures {
    pub y1: f64,
    pub y2: f64,
    pub gamma: f64,
}

impl CellMeasures {
    pub fn from_cell(cell: &CellMesh) -> Self {
        Self {
            y1: cell.area(Phase::Y1),
            y2: cell.area(Phase::Y2),
            gamma: cell.gamma_length(),
        }
    }

    /// Capacity `|Y_j| + |Γ|` of phase `j`.
    pub fn weight(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Y1 => self.y1 + self.gamma,
            Phase::Y2 => self.y2 + self.gamma,
        }
    }

    pub fn area(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Y1 => self.y1,
            Phase::Y2 => self.y2,
        }
    }
}

/// Cell averages of the reaction rates as quadrature sums over the cell mesh.
#[derive(Clone)]
pub struct AveragedReactions {
    pub spec: ReactionSpec,
    bulk: [Vec<(Point, f64)>; 2],
    surface: Vec<(Point, f64)>,
    pub measures: CellMeasures,
}

impl fmt::Debug for AveragedReactions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AveragedReactions")
            .field("spec", &self.spec)
            .field("bulk_points", &[self.bulk[0].len(), self.bulk[1].len()])
            .field("surface_points", &self.surface.len())
            .finish()
    }
}

impl AveragedReactions {
    /// Midpoint rules on the cell triangles and interface edges; a single
    /// point carrying the whole measure when the rates ignore `y`.
    pub fn new(cell: &CellMesh, spec: ReactionSpec) -> Self {
        let measures = CellMeasures::from_cell(cell);
        if spec.kinetics.is_y_independent() {
            let y0 = [0.0, 0.0];
            return Self {
                bulk: [vec![(y0, measures.y1)], vec![(y0, measures.y2)]],
                surface: vec![(y0, measures.gamma)],
                spec,
                measures,
            };
        }
        let bulk = Phase::BOTH.map(|phase| {
            let side = cell.side(phase);
            (0..side.triangles.len())
                .map(|t| {
                    let [a, b, c] = side.triangles[t];
                    let area = 0.5
                        * crate::geometry::cross(side.vertices[a], side.vertices[b], side.vertices[c]);
                    (side.centroid(t), area)
                })
                .collect()
        });
        let s = &cell.surface;
        let surface = (0..s.edge_count()).map(|e| (s.edge_midpoint(e), s.lengths[e])).collect();
        Self {
            spec,
            bulk,
            surface,
            measures,
        }
    }

    /// `∫_{Y_j} fʲ(t, y, z) dy`
    pub fn bulk(&self, phase: Phase, t: f64, z: f64) -> f64 {
        self.bulk[phase.index()]
            .iter()
            .map(|&(y, w)| w * self.spec.bulk_rate(phase, t, y, z))
            .sum()
    }

    /// `∫_Γ hʲ(t, y, z₁, z₂) dσ`
    pub fn surface(&self, phase: Phase, t: f64, z1: f64, z2: f64) -> f64 {
        self.surface
            .iter()
            .map(|&(y, w)| w * self.spec.surface_rate(phase, t, y, z1, z2))
            .sum()
    }

    /// Lipschitz constant of the averaged right-hand sides.
    pub fn lipschitz_bound(&self) -> f64 {
        let m = &self.measures;
        self.spec.lipschitz_bound * (m.y1.max(m.y2) + m.gamma)
    }
}

/// Additional forcing `g(t, x)` on the u¹ equation (manufactured solutions).
pub type Source = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub t: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// `u^j(0) = (|Y_j| u_{0,i}^j + |Γ| u_{0,i,Γ}^j) / (|Y_j| + |Γ|)`, nodewise.
pub fn weighted_initial_data(
    measures: &CellMeasures,
    bulk1: &[f64],
    surface1: &[f64],
    bulk2: &[f64],
    surface2: &[f64],
) -> MacroState {
    let combine = |phase: Phase, b: &[f64], s: &[f64]| -> Vec<f64> {
        let (wy, wg) = (measures.area(phase), measures.gamma);
        b.iter()
            .zip(s)
            .map(|(&b, &s)| (wy * b + wg * s) / (wy + wg))
            .collect()
    };
    MacroState {
        t: 0.0,
        u1: combine(Phase::Y1, bulk1, surface1),
        u2: combine(Phase::Y2, bulk2, surface2),
    }
}

/// Everything needed to advance the limit system.
#[derive(Clone)]
pub struct MacroProblem {
    pub mesh: MacroMesh,
    pub tensor: EffectiveTensor,
    pub reactions: AveragedReactions,
    pub source: Option<Source>,
}

impl fmt::Debug for MacroProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MacroProblem")
            .field("n", &self.mesh.n)
            .field("tensor", &self.tensor)
            .field("reactions", &self.reactions)
            .field("source", &self.source.is_some())
            .finish()
    }
}

impl MacroProblem {
    pub fn measures(&self) -> &CellMeasures {
        &self.reactions.measures
    }

    /// Largest rate of the explicit reaction update after division by the
    /// capacities.
    pub fn effective_lipschitz(&self) -> f64 {
        let m = self.measures();
        self.reactions.lipschitz_bound() / m.weight(Phase::Y1).min(m.weight(Phase::Y2))
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroDiagnostics {
    pub t: f64,
    /// `(|Y₁|+|Γ|) ∫ u¹`
    pub mass1: f64,
    /// `(|Y₂|+|Γ|) ∫ u²`
    pub mass2: f64,
    /// `½ Σⱼ (|Y_j|+|Γ|) ‖uʲ‖²`
    pub energy: f64,
    pub min_u1: f64,
    pub max_u1: f64,
}

pub struct MacroStepper<'a> {
    problem: &'a MacroProblem,
    pub dt: f64,
    mass: SparseOperator,
    system: SparseOperator,
    pub cg: CgSettings,
    pub stability_warning: bool,
}

impl<'a> MacroStepper<'a> {
    pub fn new(problem: &'a MacroProblem, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::validation("macro.dt", format!("time step must be positive, got {dt}")));
        }
        let mass = assemble_bulk_mass(&problem.mesh.side, 1.0);
        let stiffness = assemble_bulk_stiffness(&problem.mesh.side, &TensorField::Constant(problem.tensor.entries), 1.0)?;
        let w1 = problem.measures().weight(Phase::Y1);
        let system = mass.linear_combination(w1, &stiffness, dt);
        let l_eff = problem.effective_lipschitz();
        let stability_warning = dt * l_eff >= 1.0;
        if stability_warning {
            warn!("macro time step {dt} violates dt·L_eff < 1 (L_eff = {l_eff})");
        }
        Ok(Self {
            problem,
            dt,
            mass,
            system,
            cg: CgSettings::default(),
            stability_warning,
        })
    }

    pub fn mass_matrix(&self) -> &SparseOperator {
        &self.mass
    }

    /// One IMEX step of length `dt`.
    pub fn step(&self, state: &mut MacroState) -> Result<()> {
        let p = self.problem;
        let m = p.measures();
        let (w1, w2) = (m.weight(Phase::Y1), m.weight(Phase::Y2));
        let (t, dt) = (state.t, self.dt);
        let r = &p.reactions;
        let nodes = p.mesh.vertices();

        let rate1: Vec<f64> = state
            .u1
            .par_iter()
            .zip(&state.u2)
            .enumerate()
            .map(|(i, (&z1, &z2))| {
                let mut v = r.bulk(Phase::Y1, t, z1) + r.surface(Phase::Y1, t, z1, z2);
                if let Some(g) = &p.source {
                    v += g(t, nodes[i]);
                }
                v
            })
            .collect();
        let mu = self.mass.mul_vec(&state.u1);
        let load = self.mass.mul_vec(&rate1);
        let rhs: Vec<f64> = mu.iter().zip(&load).map(|(a, b)| w1 * a + dt * b).collect();

        let u2_next: Vec<f64> = state
            .u1
            .par_iter()
            .zip(&state.u2)
            .map(|(&z1, &z2)| z2 + dt * (r.bulk(Phase::Y2, t, z2) + r.surface(Phase::Y2, t, z1, z2)) / w2)
            .collect();

        let mut u1_next = state.u1.clone();
        pcg(&self.system, &rhs, &mut u1_next, &self.cg)?;
        if u1_next.iter().chain(&u2_next).any(|v| !v.is_finite()) {
            return Err(Error::SolverDivergence {
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        state.u1 = u1_next;
        state.u2 = u2_next;
        state.t = t + dt;
        Ok(())
    }

    pub fn diagnostics(&self, state: &MacroState) -> MacroDiagnostics {
        let m = self.problem.measures();
        let (w1, w2) = (m.weight(Phase::Y1), m.weight(Phase::Y2));
        let ones = vec![1.0; state.u1.len()];
        MacroDiagnostics {
            t: state.t,
            mass1: w1 * self.mass.bilinear_form(&ones, &state.u1),
            mass2: w2 * self.mass.bilinear_form(&ones, &state.u2),
            energy: 0.5 * (w1 * self.mass.quadratic_form(&state.u1) + w2 * self.mass.quadratic_form(&state.u2)),
            min_u1: state.u1.iter().copied().fold(f64::INFINITY, f64::min),
            max_u1: state.u1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Uniform time grid `t_k = k·T/steps` with `steps = ⌈T/dt⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::validation("dt", format!("time step must be positive, got {dt}")));
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::validation("T", format!("final time must be non-negative, got {t_end}")));
        }
        if t_end == 0.0 {
            return Ok(Self { steps: 0, dt, t_end });
        }
        let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            steps,
            dt: t_end / steps as f64,
            t_end,
        })
    }

    /// Step index closest to each requested output time.
    pub fn output_steps(&self, times: &[f64]) -> Result<Vec<usize>> {
        times
            .iter()
            .map(|&t| {
                if !(0.0..=self.t_end * (1.0 + 1e-12)).contains(&t) {
                    return Err(Error::validation("output.times", format!("{t} lies outside [0, {}]", self.t_end)));
                }
                Ok(if self.steps == 0 { 0 } else { (t / self.dt).round() as usize })
            })
            .collect()
    }
}

/// States at the output times plus per-step diagnostics.
#[derive(Debug, Clone)]
pub struct MacroTrajectory {
    pub snapshots: Vec<MacroState>,
    pub diagnostics: Vec<MacroDiagnostics>,
    pub stability_warning: bool,
}

pub fn run_macro(problem: &MacroProblem, initial: MacroState, grid: &TimeGrid, output_times: &[f64]) -> Result<MacroTrajectory> {
    let stepper = MacroStepper::new(problem, grid.dt)?;
    let outputs = grid.output_steps(output_times)?;
    let mut state = initial;
    let mut snapshots = Vec::with_capacity(outputs.len());
    let mut diagnostics = Vec::with_capacity(grid.steps + 1);
    diagnostics.push(stepper.diagnostics(&state));
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
        diagnostics.push(stepper.diagnostics(&state));
    }
    Ok(MacroTrajectory {
        snapshots,
        diagnostics,
        stability_warning: stepper.stability_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::homogenize;
    use crate::fem::{DiffusionSpec, ReactionModel};
    use crate::geometry::UnitCellGeometry;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn cell() -> &'static (CellMesh, EffectiveTensor) {
        static CELL: OnceLock<(CellMesh, EffectiveTensor)> = OnceLock::new();
        CELL.get_or_init(|| {
            let cell = CellMesh::build(&UnitCellGeometry::default(), 0.05).unwrap();
            let (_, d) = homogenize(&cell, &DiffusionSpec::default()).unwrap();
            (cell, d)
        })
    }

    fn problem(n: usize, model: ReactionModel) -> MacroProblem {
        let (cell, d) = cell();
        MacroProblem {
            mesh: MacroMesh::new(n).unwrap(),
            tensor: *d,
            reactions: AveragedReactions::new(cell, ReactionSpec::from_model(model)),
            source: None,
        }
    }

    #[test]
    fn weighted_initial_data_examples() {
        let m = CellMeasures {
            y1: 1.0 - PI / 16.0,
            y2: PI / 16.0,
            gamma: PI / 2.0,
        };
        let c = vec![0.7; 3];
        let s = weighted_initial_data(&m, &c, &c, &[1.0; 3], &[0.0; 3]);
        assert!(s.u1.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        assert!(s.u2.iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
        let z = weighted_initial_data(&m, &[0.0; 2], &[0.0; 2], &[0.0; 2], &[0.0; 2]);
        assert!(z.u1.iter().chain(&z.u2).all(|&v| v == 0.0));
    }

    #[test]
    fn constants_are_steady() {
        let p = problem(8, ReactionModel::None);
        let stepper = MacroStepper::new(&p, 1e-2).unwrap();
        let n = p.mesh.vertex_count();
        let mut s = MacroState {
            t: 0.0,
            u1: vec![0.3; n],
            u2: vec![-1.0; n],
        };
        stepper.step(&mut s).unwrap();
        assert!(s.u1.iter().all(|&v| (v - 0.3).abs() < 1e-12));
        assert!(s.u2.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn exchange_conserves_total_weighted_mass() {
        let p = problem(8, ReactionModel::Exchange { rate: 1.0 });
        let u1 = p.mesh.interpolate(|x| 1.0 + (PI * x[0]).cos());
        let u2 = p.mesh.interpolate(|x| x[1]);
        let grid = TimeGrid::new(1e-2, 0.5).unwrap();
        let traj = run_macro(&p, MacroState { t: 0.0, u1, u2 }, &grid, &[0.0, 0.5]).unwrap();
        let total = |d: &MacroDiagnostics| d.mass1 + d.mass2;
        let first = total(&traj.diagnostics[0]);
        let last = total(traj.diagnostics.last().unwrap());
        assert!((last - first).abs() < 1e-9 * first.abs());
        assert_eq!(traj.snapshots.len(), 2);
        assert!((traj.snapshots[1].t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_final_time_echoes_the_initial_state() {
        let p = problem(4, ReactionModel::None);
        let init = MacroState {
            t: 0.0,
            u1: p.mesh.interpolate(|x| x[0]),
            u2: p.mesh.interpolate(|x| x[1]),
        };
        let grid = TimeGrid::new(1e-3, 0.0).unwrap();
        let traj = run_macro(&p, init.clone(), &grid, &[0.0]).unwrap();
        assert_eq!(traj.snapshots, vec![init]);
    }

    #[test]
    fn interpolation_and_gradient_are_exact_for_affine_fields() {
        let mesh = MacroMesh::new(5).unwrap();
        let u = mesh.interpolate(|x| 2.0 * x[0] - 3.0 * x[1] + 0.5);
        for x in [[0.13, 0.77], [0.5, 0.5], [1.0, 1.0], [0.0, 0.31]] {
            assert!((mesh.eval(&u, x) - (2.0 * x[0] - 3.0 * x[1] + 0.5)).abs() < 1e-13);
            let g = mesh.grad(&u, x);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
        assert!(mesh.l2_error(&u, |x| 2.0 * x[0] - 3.0 * x[1] + 0.5) < 1e-14);
    }

    #[test]
    fn large_steps_raise_the_stability_flag() {
        let p = problem(4, ReactionModel::Linear { k1: 100.0, k2: 100.0 });
        assert!(MacroStepper::new(&p, 1.0).unwrap().stability_warning);
        assert!(!MacroStepper::new(&p, 1e-4).unwrap().stability_warning);
    }

    #[test]
    fn y_dependent_averages_use_the_cell_quadrature() {
        let (cell, _) = cell();
        let model = ReactionModel::ModulatedExchange { rate: 1.0, amplitude: 0.0 };
        let a = AveragedReactions::new(cell, ReactionSpec::from_model(model));
        let b = AveragedReactions::new(cell, ReactionSpec::from_model(ReactionModel::ModulatedExchange { rate: 1.0, amplitude: 1e-300 }));
        let (x, y) = (a.surface(Phase::Y1, 0.0, 0.2, 1.0), b.surface(Phase::Y1, 0.0, 0.2, 1.0));
        assert!((x - y).abs() < 1e-12);
    }
}
