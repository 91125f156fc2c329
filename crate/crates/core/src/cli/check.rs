//! The `check` command: every module-level invariant in one report.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::output::write_text;
use super::run::{cell_mesh, diffusion, reactions};
use crate::cell::homogenize;
use crate::error::{Error, Result};
use crate::fem::trace::random_field;
use crate::fem::{calibrate_trace_constant, CoupledDofMap, NormOperators};
use crate::geometry::{build_epsilon_tiling, CellMesh, Phase};
use crate::microscopic::build_wentzell_system;
use crate::two_scale::{identity_defects, nonlinear_compatibility_defect};

pub const NORM_IDENTITY_TOL: f64 = 1e-10;
pub const GRADIENT_IDENTITY_TOL: f64 = 1e-12;
pub const COMPATIBILITY_TOL: f64 = 1e-12;

/// Outcome of one check; `value` is compared against `threshold` unless
/// the check failed with an error.
#[derive(Debug)]
pub struct CheckItem {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
    pub error: Option<Error>,
}

impl CheckItem {
    fn bound(name: &'static str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
            error: None,
        }
    }

    fn failed(name: &'static str, error: Error) -> Self {
        Self {
            name,
            passed: false,
            value: f64::NAN,
            threshold: f64::NAN,
            detail: error.to_string(),
            error: Some(error),
        }
    }
}

#[derive(Debug, Default)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,status,value,threshold,detail\n");
        for i in &self.items {
            let status = if i.passed { "pass" } else { "fail" };
            let detail = i.detail.replace(['"', '\n'], "'");
            out.push_str(&format!("{},{status},{:.6e},{:.6e},\"{detail}\"\n", i.name, i.value, i.threshold));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }
}

fn record(report: &mut CheckReport, name: &'static str, result: Result<CheckItem>) {
    report.items.push(result.unwrap_or_else(|e| CheckItem::failed(name, e)));
}

/// Runs the geometry, model, cell, trace, unfolding and compatibility
/// checks. Stages that need a cell mesh are skipped when it cannot be built.
pub fn run_checks(config: &RunConfig) -> CheckReport {
    let mut report = CheckReport::default();
    let spec = diffusion(config);
    record(
        &mut report,
        "diffusion",
        spec.validate(32).map(|_| CheckItem::bound("diffusion", 0.0, 0.0, format!("coercive with c0 = {}", spec.c0))),
    );
    let react = reactions(config);
    let lip = react.sample_lipschitz(config.check.seed, 4000, 10.0);
    report.items.push(CheckItem::bound(
        "lipschitz",
        lip.observed,
        lip.declared * (1.0 + 1e-12) + 1e-14,
        format!("{} samples of `{}`", lip.samples, config.model.reaction.name()),
    ));

    let cell = match cell_mesh(config, config.cell.h) {
        Ok(c) => c,
        Err(e) => {
            report.items.push(CheckItem::failed("cell_mesh", e));
            return report;
        }
    };
    report.items.push(CheckItem::bound(
        "cell_mesh",
        0.0,
        0.0,
        format!("{} vertices, {} interface nodes", cell.mesh.vertex_count(), cell.surface.node_count()),
    ));
    record(&mut report, "dofmap", CoupledDofMap::for_cell(&cell).map(|_| CheckItem::bound("dofmap", 0.0, 0.0, "")));
    record(&mut report, "cell_tensor", cell_tensor(&cell, config));

    let micro_cell = match config.geometry.mesh_file {
        Some(_) => Ok(cell.clone()),
        None => cell_mesh(config, config.micro.cell_h),
    };
    match micro_cell {
        Ok(mc) => {
            record(&mut report, "trace_inequality", trace_check(&mc, config));
            match unfolding_checks(&mc, config) {
                Ok(items) => report.items.extend(items),
                Err(e) => report.items.push(CheckItem::failed("unfolding", e)),
            }
            record(&mut report, "wentzell_operators", operator_check(&mc, config));
        }
        Err(e) => report.items.push(CheckItem::failed("micro_cell_mesh", e)),
    }
    report
}

fn cell_tensor(cell: &CellMesh, config: &RunConfig) -> Result<CheckItem> {
    let (_, tensor) = homogenize(cell, &diffusion(config))?;
    tensor.certify()?;
    Ok(CheckItem::bound(
        "cell_tensor",
        -tensor.min_eigenvalue,
        0.0,
        format!("D̂ = {:?}, symmetry defect {:e}", tensor.entries, tensor.symmetry_defect),
    ))
}

/// Calibrates the trace constant on one seed and validates it on fresh fields.
fn trace_check(cell: &Arc<CellMesh>, config: &RunConfig) -> Result<CheckItem> {
    let ns = &config.sweep.ns;
    let theta = config.micro.trace_theta;
    let cal = calibrate_trace_constant(cell, theta, ns, config.check.fields, config.check.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.check.seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for &n in ns {
        let tiling = build_epsilon_tiling(cell.clone(), n)?;
        for phase in Phase::BOTH {
            let side = tiling.side(phase);
            let ops = NormOperators::new(side);
            for _ in 0..config.check.fields {
                worst = worst.max(cal.inequality.check(&ops, &random_field(side, &mut rng)).ratio);
            }
        }
    }
    Ok(CheckItem::bound(
        "trace_inequality",
        worst,
        1.0,
        format!("C({theta}) = {:.6}", cal.inequality.constant),
    ))
}

fn unfolding_checks(cell: &Arc<CellMesh>, config: &RunConfig) -> Result<Vec<CheckItem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.check.seed.wrapping_add(2));
    let (mut norm, mut grad, mut compat) = (0.0f64, 0.0f64, 0.0f64);
    let react = reactions(config);
    for &n in &config.sweep.ns {
        let tiling = build_epsilon_tiling(cell.clone(), n)?;
        for _ in 0..config.check.fields {
            let u = Phase::BOTH.map(|p| random_field(tiling.side(p), &mut rng));
            for phase in Phase::BOTH {
                let d = identity_defects(&tiling, phase, &u[phase.index()])?;
                norm = norm.max(d.bulk_norm).max(d.surface_norm);
                grad = grad.max(d.bulk_gradient).max(d.surface_gradient);
            }
            compat = compat.max(nonlinear_compatibility_defect(&tiling, &react, 0.0, &u[0], &u[1])?);
        }
    }
    let samples = format!("{} fields per ε", config.check.fields);
    Ok(vec![
        CheckItem::bound("unfolding_norms", norm, NORM_IDENTITY_TOL, samples.clone()),
        CheckItem::bound("unfolding_gradients", grad, GRADIENT_IDENTITY_TOL, samples.clone()),
        CheckItem::bound("nonlinear_compatibility", compat, COMPATIBILITY_TOL, samples),
    ])
}

/// Symmetry of the ε-problem operators at `micro.epsilon`.
fn operator_check(cell: &Arc<CellMesh>, config: &RunConfig) -> Result<CheckItem> {
    let tiling = Arc::new(build_epsilon_tiling(cell.clone(), config.micro.n)?);
    let sys = build_wentzell_system(tiling, &diffusion(config))?;
    let worst = sys
        .mass
        .iter()
        .chain(&sys.stiffness)
        .map(|a| a.symmetry_defect())
        .fold(0.0, f64::max);
    Ok(CheckItem::bound("wentzell_operators", worst, 1e-12, format!("ε = 1/{}", config.micro.n)))
}
