//! Orchestration of the `cell`, `macro`, `micro` and `sweep` commands.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};

use super::config::{DiffusionFamily, RunConfig};
use super::output::{time_label, write_csv, write_dat, write_field, Table};
use crate::cell::{homogenize, EffectiveTensor};
use crate::error::{Error, Result};
use crate::fem::{calibrate_trace_constant, DiffusionSpec, ReactionSpec, ScalarField, TensorField};
use crate::geometry::io::{read_mesh, write_mesh};
use crate::geometry::{build_epsilon_tiling, CellMesh, Phase, Point, UnitCellGeometry};
use crate::macroscopic::{run_macro, AveragedReactions, MacroMesh, MacroProblem, MacroTrajectory, TimeGrid};
use crate::microscopic::{build_wentzell_system, micro_initial_state, micro_run, InitialData, MicroTrajectory};
use crate::two_scale::{convergence_sweep, macro_initial_state, ConvergenceReport, ShiftRegion, SweepConfig, SweepRow};

pub fn geometry(config: &RunConfig) -> Result<UnitCellGeometry> {
    let g = &config.geometry;
    UnitCellGeometry::disc(g.center, g.radius, g.clearance)
}

/// Cell mesh of size `h`, or the mesh file named in the configuration.
pub fn cell_mesh(config: &RunConfig, h: f64) -> Result<Arc<CellMesh>> {
    let cell = match &config.geometry.mesh_file {
        Some(path) => CellMesh::from_mesh(read_mesh(path)?).map_err(|e| Error::InFile {
            path: path.clone(),
            source: Box::new(e),
        })?,
        None => CellMesh::build(&geometry(config)?, h)?,
    };
    Ok(Arc::new(cell))
}

pub fn diffusion(config: &RunConfig) -> DiffusionSpec {
    let m = &config.model;
    match m.diffusion {
        DiffusionFamily::Constant => DiffusionSpec::isotropic(m.d1, m.d2, m.dg1, m.dg2),
        DiffusionFamily::Modulated => {
            let a = m.amplitude;
            let tensor = |d: f64| TensorField::Modulated {
                base: [[d, 0.0], [0.0, d]],
                amplitude: a,
            };
            let scalar = |d: f64| ScalarField::Modulated { base: d, amplitude: a };
            DiffusionSpec {
                d1: tensor(m.d1),
                d2: tensor(m.d2),
                dg1: scalar(m.dg1),
                dg2: scalar(m.dg2),
                c0: m.d1.min(m.d2).min(m.dg1).min(m.dg2) * (1.0 - a),
            }
        }
    }
}

pub fn reactions(config: &RunConfig) -> ReactionSpec {
    let spec = ReactionSpec::from_model(config.model.reaction);
    match config.model.lipschitz {
        Some(l) => spec.with_declared_lipschitz(l),
        None => spec,
    }
}

/// Separable profiles `U^j(x, y)` from the `initial.*` keys.
pub fn initial_data(config: &RunConfig) -> InitialData {
    let i = config.initial.clone();
    let (m1, a1, m2, a2) = (i.u1_mean, i.u1_amplitude, i.u2_mean, i.u2_amplitude);
    InitialData {
        bulk: [
            Arc::new(move |x: Point, _| m1 + a1 * (PI * x[0]).cos() * (PI * x[1]).cos()),
            Arc::new(move |x: Point, _| m2 + a2 * x[0] * x[0] * x[1]),
        ],
        surface: None,
    }
}

pub fn sweep_config(config: &RunConfig) -> Result<SweepConfig> {
    let s = &config.sweep;
    let cell_mesh = match config.geometry.mesh_file {
        Some(_) => Some(cell_mesh(config, s.cell_h)?),
        None => None,
    };
    Ok(SweepConfig {
        ns: s.ns.clone(),
        geometry: match cell_mesh {
            Some(_) => UnitCellGeometry::default(),
            None => geometry(config)?,
        },
        cell_h: s.cell_h,
        cell_mesh,
        diffusion: diffusion(config),
        reactions: reactions(config),
        initial: initial_data(config),
        dt: s.dt,
        t_end: s.t_end,
        macro_n: s.macro_n,
        snapshots: s.snapshots,
        shifts: vec![[1, 0], [0, 1], [2, 0], [0, 2]],
        shift_region: ShiftRegion::Admissible,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Y₁ corrector extended to the whole cell mesh; it vanishes on Y₂.
fn extend_to_cell(cell: &CellMesh, w: &[f64]) -> Vec<f64> {
    let mesh = &cell.mesh;
    let mut in_y1 = vec![false; mesh.vertices.len()];
    for (tri, tag) in mesh.triangles.iter().zip(&mesh.tags) {
        if *tag == Phase::Y1 {
            for &v in tri {
                in_y1[v] = true;
            }
        }
    }
    let mut local = 0;
    in_y1
        .iter()
        .map(|&inside| {
            if inside {
                local += 1;
                w[local - 1]
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub tensor: EffectiveTensor,
    pub files: Vec<PathBuf>,
}

/// Solves the cell problems and writes `effective_tensor.csv`, the cell
/// mesh and both correctors.
pub fn run_cell(config: &RunConfig) -> Result<CellOutcome> {
    let cell = cell_mesh(config, config.cell.h)?;
    let spec = diffusion(config);
    spec.validate(32)?;
    let (solutions, tensor) = homogenize(&cell, &spec)?;
    tensor.certify()?;
    info!("cell: D̂ = {:?}", tensor.entries);

    let dir = &config.output.dir;
    ensure_dir(dir)?;
    let mut table = Table::new(&["i", "l", "value"]);
    for i in 0..2 {
        for l in 0..2 {
            table.push(vec![(i + 1) as f64, (l + 1) as f64, tensor.entries[i][l]]);
        }
    }
    let mut files = vec![dir.join("effective_tensor.csv"), dir.join("cell_mesh.mesh")];
    write_text_table_ints(&table, &files[0])?;
    write_mesh(&cell.mesh, &files[1])?;
    for i in 0..2 {
        let path = dir.join(format!("corrector_w{}.field", i + 1));
        write_field("cell_mesh", &extend_to_cell(&cell, solutions.w(i)), &path)?;
        files.push(path);
    }
    Ok(CellOutcome { tensor, files })
}

/// `effective_tensor.csv` keeps integer indices readable.
fn write_text_table_ints(table: &Table, path: &Path) -> Result<()> {
    let mut out = table.columns.join(",");
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!("{},{},{:.16e}\n", row[0] as usize, row[1] as usize, row[2]));
    }
    super::output::write_text(path, &out)
}

#[derive(Debug, Clone)]
pub struct MacroOutcome {
    pub tensor: EffectiveTensor,
    pub trajectory: MacroTrajectory,
    pub files: Vec<PathBuf>,
}

pub const MACRO_DIAGNOSTICS: [&str; 6] = ["t", "mass1", "mass2", "energy", "min_u1", "max_u1"];

/// Runs the limit problem and writes `macro_u{1,2}_<t>.field` and `diagnostics.csv`.
pub fn run_macro_command(config: &RunConfig) -> Result<MacroOutcome> {
    let cell = cell_mesh(config, config.cell.h)?;
    let spec = diffusion(config);
    spec.validate(32)?;
    let (_, tensor) = homogenize(&cell, &spec)?;
    tensor.certify()?;
    let mesh = MacroMesh::new(config.macro_.n)?;
    let initial = macro_initial_state(&mesh, &cell, &initial_data(config));
    let problem = MacroProblem {
        mesh,
        tensor,
        reactions: AveragedReactions::new(&cell, reactions(config)),
        source: None,
    };
    let grid = TimeGrid::new(config.macro_.dt, config.macro_.t_end)?;
    let times = config.output_times(grid.t_end);
    let trajectory = run_macro(&problem, initial, &grid, &times)?;
    if trajectory.stability_warning {
        warn!("macro: dt exceeds the explicit reaction budget");
    }

    let dir = &config.output.dir;
    ensure_dir(dir)?;
    let label = format!("macro_n{}", config.macro_.n);
    let mut files = Vec::new();
    for (t, s) in times.iter().zip(&trajectory.snapshots) {
        for (j, values) in [(1, &s.u1), (2, &s.u2)] {
            let path = dir.join(format!("macro_u{j}_{}.field", time_label(*t)));
            write_field(&label, values, &path)?;
            files.push(path);
        }
    }
    let mut table = Table::new(&MACRO_DIAGNOSTICS);
    for d in &trajectory.diagnostics {
        table.push(vec![d.t, d.mass1, d.mass2, d.energy, d.min_u1, d.max_u1]);
    }
    let path = dir.join("diagnostics.csv");
    write_csv(&table, &path)?;
    files.push(path);
    Ok(MacroOutcome {
        tensor,
        trajectory,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct MicroOutcome {
    pub epsilon: f64,
    pub trajectory: MicroTrajectory,
    pub trace_constant: f64,
    pub files: Vec<PathBuf>,
}

pub const MICRO_DIAGNOSTICS: [&str; 6] = ["t", "mass1", "mass2", "hje_norm1", "hje_norm2", "trace_check_ratio"];

/// Runs the ε-problem at `micro.epsilon` and writes `micro_u{1,2}_<t>.field`
/// and `micro_diagnostics.csv`.
pub fn run_micro_command(config: &RunConfig) -> Result<MicroOutcome> {
    let n = config.micro.n;
    let cell = cell_mesh(config, config.micro.cell_h)?;
    let spec = diffusion(config);
    spec.validate(32)?;
    let tiling = Arc::new(build_epsilon_tiling(cell.clone(), n)?);
    let sys = build_wentzell_system(tiling, &spec)?;
    let calibration = calibrate_trace_constant(&cell, config.micro.trace_theta, &[n], config.check.fields, config.check.seed)?;
    let start = micro_initial_state(&sys, &initial_data(config))?;
    let grid = TimeGrid::new(config.micro.dt, config.micro.t_end)?;
    let times = config.output_times(grid.t_end);
    let react = reactions(config);
    let trajectory = micro_run(&sys, &react, start, &grid, &times, Some(&calibration.inequality))?;
    if trajectory.stability_warning {
        warn!("micro: dt exceeds the explicit reaction budget");
    }

    let dir = &config.output.dir;
    ensure_dir(dir)?;
    let mut files = Vec::new();
    for (t, s) in times.iter().zip(&trajectory.snapshots) {
        for phase in Phase::BOTH {
            let j = phase.index() + 1;
            let path = dir.join(format!("micro_u{j}_{}.field", time_label(*t)));
            write_field(&format!("micro_y{j}_n{n}"), s.field(phase), &path)?;
            files.push(path);
        }
    }
    let mut table = Table::new(&MICRO_DIAGNOSTICS);
    for d in &trajectory.diagnostics {
        table.push(vec![d.t, d.mass1, d.mass2, d.hje_norm1, d.hje_norm2, d.trace_check_ratio]);
    }
    let path = dir.join("micro_diagnostics.csv");
    write_csv(&table, &path)?;
    files.push(path);
    Ok(MicroOutcome {
        epsilon: sys.epsilon,
        trajectory,
        trace_constant: calibration.inequality.constant,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: ConvergenceReport,
    pub files: Vec<PathBuf>,
}

pub const SHIFT_COLUMNS: [&str; 7] = ["epsilon", "l1", "l2", "lhs", "delta_u1", "delta_initial", "check_ratio"];

/// Runs the ε-sweep and writes `convergence_report.csv`, its `.dat` mirror
/// and `shift_report.csv`. A non-monotone sweep still writes its files; the
/// caller inspects [`ConvergenceReport::monotonicity_error`].
pub fn run_sweep_command(config: &RunConfig) -> Result<SweepOutcome> {
    let sweep = sweep_config(config)?;
    sweep.diffusion.validate(32)?;
    let report = convergence_sweep(&sweep)?;
    if report.stability_warning {
        warn!("sweep: dt exceeds the explicit reaction budget");
    }
    let dir = &config.output.dir;
    ensure_dir(dir)?;
    let mut table = Table::new(&SweepRow::COLUMNS);
    for row in &report.rows {
        table.push(row.values().to_vec());
    }
    let csv = dir.join("convergence_report.csv");
    let dat = dir.join("convergence_report.dat");
    write_csv(&table, &csv)?;
    write_dat(&table, &dat)?;

    let mut shifts = Table::new(&SHIFT_COLUMNS);
    let checked = report.shift_check();
    for s in &report.shifts {
        let ratio = checked
            .iter()
            .find(|(c, _)| c == s)
            .map_or(f64::NAN, |(_, r)| *r);
        shifts.push(vec![s.epsilon, s.l[0] as f64, s.l[1] as f64, s.lhs, s.delta_u1, s.delta_initial, ratio]);
    }
    let shift_path = dir.join("shift_report.csv");
    write_csv(&shifts, &shift_path)?;
    Ok(SweepOutcome {
        report,
        files: vec![csv, dat, shift_path],
    })
}
