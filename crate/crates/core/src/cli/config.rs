//! Plain-text run configuration.
//!
//! ```text
//! # comment
//! [macro]
//! h = 1/32
//! dt = 1e-3
//! micro.epsilon = 1/4      # dotted keys work in any section-free line
//! ```
//!
//! Every key has a default, so an empty file is a complete configuration.
//! Unknown or repeated keys are parse errors; values that parse but fall
//! outside their range are validation errors naming the key.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::ReactionModel;
use crate::geometry::{Point, UnitCellGeometry};

/// Subcommands of the command line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Cell,
    Macro,
    Micro,
    Sweep,
    Check,
}

impl Command {
    pub const ALL: [Command; 5] = [Command::Cell, Command::Macro, Command::Micro, Command::Sweep, Command::Check];

    pub fn name(self) -> &'static str {
        match self {
            Command::Cell => "cell",
            Command::Macro => "macro",
            Command::Micro => "micro",
            Command::Sweep => "sweep",
            Command::Check => "check",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::validation("command", format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionFamily {
    /// Constant isotropic coefficients.
    Constant,
    /// Isotropic coefficients modulated by `1 + amplitude·cos(2πy₁)cos(2πy₂)`.
    Modulated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub radius: f64,
    pub center: Point,
    pub clearance: f64,
    /// Cell mesh read from disk instead of generated; overrides every cell mesh size.
    pub mesh_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroConfig {
    /// Intervals per side of Ω, `h = 1/n`.
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroConfig {
    /// `ε = 1/n`
    pub n: usize,
    pub cell_h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub trace_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    /// Values of `1/ε`.
    pub ns: Vec<usize>,
    pub cell_h: f64,
    pub macro_n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub diffusion: DiffusionFamily,
    pub d1: f64,
    pub d2: f64,
    pub dg1: f64,
    pub dg2: f64,
    pub amplitude: f64,
    pub reaction: ReactionModel,
    /// Declared Lipschitz bound; the catalog value when unset.
    pub lipschitz: Option<f64>,
}

/// Profiles `U¹ = u1_mean + u1_amplitude·cos(πx₁)cos(πx₂)` and
/// `U² = u2_mean + u2_amplitude·x₁²x₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub u1_mean: f64,
    pub u1_amplitude: f64,
    pub u2_mean: f64,
    pub u2_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Output times; eleven uniform times over `[0, T]` when unset.
    pub times: Option<Vec<f64>>,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub seed: u64,
    pub fields: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub cell: CellConfig,
    pub macro_: MacroConfig,
    pub micro: MicroConfig,
    pub sweep: SweepSettings,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    pub check: CheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig {
                radius: 0.25,
                center: [0.5, 0.5],
                clearance: 0.05,
                mesh_file: None,
            },
            cell: CellConfig { h: 0.02 },
            macro_: MacroConfig {
                n: 32,
                dt: 1e-3,
                t_end: 0.5,
            },
            micro: MicroConfig {
                n: 4,
                cell_h: 0.125,
                dt: 1e-3,
                t_end: 0.5,
                trace_theta: 0.5,
            },
            sweep: SweepSettings {
                ns: vec![2, 4, 8],
                cell_h: 0.125,
                macro_n: 32,
                dt: 1e-3,
                t_end: 0.25,
                snapshots: 11,
            },
            model: ModelConfig {
                diffusion: DiffusionFamily::Constant,
                d1: 1.0,
                d2: 1.0,
                dg1: 1.0,
                dg2: 1.0,
                amplitude: 0.5,
                reaction: ReactionModel::Exchange { rate: 1.0 },
                lipschitz: None,
            },
            initial: InitialConfig {
                u1_mean: 1.0,
                u1_amplitude: 2.0,
                u2_mean: 0.25,
                u2_amplitude: 2.0,
            },
            output: OutputConfig {
                times: None,
                dir: PathBuf::from("out"),
            },
            check: CheckConfig { seed: 1, fields: 20 },
        }
    }
}

/// Every accepted key, in serialization order.
pub const KEYS: [&str; 36] = [
    "geometry.radius",
    "geometry.center",
    "geometry.clearance",
    "geometry.mesh_file",
    "cell.h",
    "macro.h",
    "macro.dt",
    "macro.T",
    "micro.epsilon",
    "micro.cell_h",
    "micro.dt",
    "micro.T",
    "micro.trace_theta",
    "sweep.epsilons",
    "sweep.cell_h",
    "sweep.macro_h",
    "sweep.dt",
    "sweep.T",
    "sweep.snapshots",
    "model.diffusion",
    "model.d1",
    "model.d2",
    "model.dg1",
    "model.dg2",
    "model.amplitude",
    "model.reaction",
    "model.reaction_params",
    "model.lipschitz",
    "initial.u1_mean",
    "initial.u1_amplitude",
    "initial.u2_mean",
    "initial.u2_amplitude",
    "output.times",
    "output.dir",
    "check.seed",
    "check.fields",
];

/// Parses a configuration; equivalent to [`parse_config_with_overrides`] without overrides.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parses a configuration and then applies `key=value` overrides (for
/// instance from the command line), which may replace keys set in `text`.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut entries = read_entries(text)?;
    for (i, o) in overrides.iter().enumerate() {
        let Some((key, value)) = o.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("override `{o}` is not of the form key=value"),
            });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("unknown key `{key}` in override"),
            });
        }
        entries.insert(key.to_string(), (0, unquote(value.trim()).to_string()));
    }
    let mut config = RunConfig::default();
    for (key, (_, value)) in &entries {
        config.set(key, value)?;
    }
    config.validate()?;
    Ok(config)
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

/// Collects `full key → (line, raw value)` with duplicate and unknown-key detection.
fn read_entries(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let sections: Vec<&str> = KEYS.iter().filter_map(|k| k.split_once('.').map(|s| s.0)).collect();
    let mut section: Option<String> = None;
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_error = |message: String| Error::Parse { line, message };
        if let Some(inner) = content.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| parse_error(format!("unterminated section header `{content}`")))?
                .trim();
            if !sections.contains(&name) {
                return Err(parse_error(format!("unknown section `[{name}]`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(parse_error(format!("malformed key `{key}`")));
        }
        let full = match &section {
            Some(s) if !key.contains('.') => format!("{s}.{key}"),
            _ => key.to_string(),
        };
        if !KEYS.contains(&full.as_str()) {
            return Err(parse_error(format!("unknown key `{full}`")));
        }
        if let Some((first, _)) = entries.get(&full) {
            return Err(parse_error(format!("`{full}` already set on line {first}")));
        }
        entries.insert(full, (line, unquote(value.trim()).to_string()));
    }
    Ok(entries)
}

fn number(key: &str, v: &str) -> Result<f64> {
    let parsed = match v.split_once('/') {
        Some((a, b)) => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(a), Ok(b)) if b != 0.0 => Ok(a / b),
            _ => Err(()),
        },
        None => v.parse::<f64>().map_err(|_| ()),
    };
    match parsed {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::validation(key, format!("`{v}` is not a finite number"))),
    }
}

fn integer(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::validation(key, format!("`{v}` is not a non-negative integer")))
}

/// `1/N` or a decimal whose reciprocal is a positive integer; returns `N`.
pub fn parse_reciprocal(key: &str, v: &str) -> Result<usize> {
    let v = v.trim();
    let invalid = |why: &str| Error::validation(key, format!("`{v}` {why}"));
    if let Some((a, b)) = v.split_once('/') {
        let one: f64 = a.trim().parse().map_err(|_| invalid("is not of the form 1/N"))?;
        let n: usize = b.trim().parse().map_err(|_| invalid("is not of the form 1/N"))?;
        if one != 1.0 || n == 0 {
            return Err(invalid("is not of the form 1/N with N a positive integer"));
        }
        return Ok(n);
    }
    let x: f64 = v.parse().map_err(|_| invalid("is not a number"))?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(invalid("must lie in (0, 1]"));
    }
    let n = (1.0 / x).round();
    if (n * x - 1.0).abs() > 1e-9 {
        return Err(invalid("has a reciprocal that is not an integer"));
    }
    Ok(n as usize)
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(s.trim())).collect()
}

fn reaction_params(model: &ReactionModel) -> Vec<f64> {
    match *model {
        ReactionModel::None => vec![],
        ReactionModel::Linear { k1, k2 } => vec![k1, k2],
        ReactionModel::Exchange { rate } => vec![rate],
        ReactionModel::LogisticTruncated { r1, r2 } => vec![r1, r2],
        ReactionModel::ModulatedExchange { rate, amplitude } => vec![rate, amplitude],
    }
}

fn reaction_model(name: &str, p: &[f64]) -> Result<ReactionModel> {
    let key = "model.reaction_params";
    let expect = |n: usize| -> Result<()> {
        if p.len() == n {
            Ok(())
        } else {
            Err(Error::validation(key, format!("reaction `{name}` takes {n} parameters, got {}", p.len())))
        }
    };
    Ok(match name {
        "none" => {
            expect(0)?;
            ReactionModel::None
        }
        "linear" => {
            expect(2)?;
            ReactionModel::Linear { k1: p[0], k2: p[1] }
        }
        "exchange" => {
            expect(1)?;
            ReactionModel::Exchange { rate: p[0] }
        }
        "logistic" => {
            expect(2)?;
            ReactionModel::LogisticTruncated { r1: p[0], r2: p[1] }
        }
        "modulated_exchange" => {
            expect(2)?;
            ReactionModel::ModulatedExchange {
                rate: p[0],
                amplitude: p[1],
            }
        }
        other => {
            return Err(Error::validation(
                "model.reaction",
                format!("unknown reaction `{other}` (none, linear, exchange, logistic, modulated_exchange)"),
            ))
        }
    })
}

/// Default parameters when only the reaction family is given.
fn default_params(name: &str) -> Vec<f64> {
    match name {
        "linear" | "logistic" => vec![1.0, 1.0],
        "exchange" => vec![1.0],
        "modulated_exchange" => vec![1.0, 0.5],
        _ => vec![],
    }
}

impl RunConfig {
    /// Sets one key from its textual value without range validation.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let num = |v: &str| number(key, v);
        match key {
            "geometry.radius" => self.geometry.radius = num(v)?,
            "geometry.center" => {
                let c = list(v, num)?;
                if c.len() != 2 {
                    return Err(Error::validation(key, "expected two coordinates `x, y`"));
                }
                self.geometry.center = [c[0], c[1]];
            }
            "geometry.clearance" => self.geometry.clearance = num(v)?,
            "geometry.mesh_file" => self.geometry.mesh_file = (!v.is_empty()).then(|| PathBuf::from(v)),
            "cell.h" => self.cell.h = num(v)?,
            "macro.h" => self.macro_.n = parse_reciprocal(key, v)?,
            "macro.dt" => self.macro_.dt = num(v)?,
            "macro.T" => self.macro_.t_end = num(v)?,
            "micro.epsilon" => self.micro.n = parse_reciprocal(key, v)?,
            "micro.cell_h" => self.micro.cell_h = num(v)?,
            "micro.dt" => self.micro.dt = num(v)?,
            "micro.T" => self.micro.t_end = num(v)?,
            "micro.trace_theta" => self.micro.trace_theta = num(v)?,
            "sweep.epsilons" => self.sweep.ns = list(v, |s| parse_reciprocal(key, s))?,
            "sweep.cell_h" => self.sweep.cell_h = num(v)?,
            "sweep.macro_h" => self.sweep.macro_n = parse_reciprocal(key, v)?,
            "sweep.dt" => self.sweep.dt = num(v)?,
            "sweep.T" => self.sweep.t_end = num(v)?,
            "sweep.snapshots" => self.sweep.snapshots = integer(key, v)?,
            "model.diffusion" => {
                self.model.diffusion = match v {
                    "constant" => DiffusionFamily::Constant,
                    "modulated" => DiffusionFamily::Modulated,
                    _ => return Err(Error::validation(key, format!("unknown family `{v}` (constant, modulated)"))),
                }
            }
            "model.d1" => self.model.d1 = num(v)?,
            "model.d2" => self.model.d2 = num(v)?,
            "model.dg1" => self.model.dg1 = num(v)?,
            "model.dg2" => self.model.dg2 = num(v)?,
            "model.amplitude" => self.model.amplitude = num(v)?,
            "model.reaction" => {
                // keep the parameters when they fit the new family
                let params = reaction_params(&self.model.reaction);
                self.model.reaction = reaction_model(v, &params).or_else(|_| reaction_model(v, &default_params(v)))?;
            }
            "model.reaction_params" => {
                let params = list(v, num)?;
                self.model.reaction = reaction_model(self.model.reaction.name(), &params)?;
            }
            "model.lipschitz" => self.model.lipschitz = if v == "auto" { None } else { Some(num(v)?) },
            "initial.u1_mean" => self.initial.u1_mean = num(v)?,
            "initial.u1_amplitude" => self.initial.u1_amplitude = num(v)?,
            "initial.u2_mean" => self.initial.u2_mean = num(v)?,
            "initial.u2_amplitude" => self.initial.u2_amplitude = num(v)?,
            "output.times" => self.output.times = if v == "auto" { None } else { Some(list(v, num)?) },
            "output.dir" => self.output.dir = PathBuf::from(v),
            "check.seed" => self.check.seed = v.parse().map_err(|_| Error::validation(key, format!("`{v}` is not a seed")))?,
            "check.fields" => self.check.fields = integer(key, v)?,
            _ => return Err(Error::validation(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.mesh_file.is_none() {
            UnitCellGeometry::disc(g.center, g.radius, g.clearance)
                .map_err(|e| Error::validation("geometry.radius", e.to_string()))?;
        }
        let positive = |key: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(key, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(Error::validation(key, format!("must be non-negative, got {v}")))
            }
        };
        let mesh_size = |key: &str, v: f64| {
            if v > 0.0 && v <= 0.25 {
                Ok(())
            } else {
                Err(Error::validation(key, format!("cell mesh size must lie in (0, 0.25], got {v}")))
            }
        };
        let at_least_one = |key: &str, n: usize| {
            if n >= 1 {
                Ok(())
            } else {
                Err(Error::validation(key, "must be 1/N with N ≥ 1"))
            }
        };
        mesh_size("cell.h", self.cell.h)?;
        at_least_one("macro.h", self.macro_.n)?;
        positive("macro.dt", self.macro_.dt)?;
        non_negative("macro.T", self.macro_.t_end)?;
        at_least_one("micro.epsilon", self.micro.n)?;
        mesh_size("micro.cell_h", self.micro.cell_h)?;
        positive("micro.dt", self.micro.dt)?;
        non_negative("micro.T", self.micro.t_end)?;
        positive("micro.trace_theta", self.micro.trace_theta)?;

        let s = &self.sweep;
        if s.ns.is_empty() {
            return Err(Error::validation("sweep.epsilons", "needs at least one value"));
        }
        for &n in &s.ns {
            at_least_one("sweep.epsilons", n)?;
        }
        let mut distinct = s.ns.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != s.ns.len() {
            return Err(Error::validation("sweep.epsilons", "values must be distinct"));
        }
        mesh_size("sweep.cell_h", s.cell_h)?;
        at_least_one("sweep.macro_h", s.macro_n)?;
        if let Some(n) = s.ns.iter().find(|&&n| s.macro_n % n != 0) {
            return Err(Error::validation(
                "sweep.macro_h",
                format!("1/h = {} is not a multiple of 1/ε = {n}", s.macro_n),
            ));
        }
        positive("sweep.dt", s.dt)?;
        non_negative("sweep.T", s.t_end)?;
        if s.snapshots < 2 {
            return Err(Error::validation("sweep.snapshots", "needs at least two snapshots"));
        }

        let m = &self.model;
        for (key, v) in [("model.d1", m.d1), ("model.d2", m.d2), ("model.dg1", m.dg1), ("model.dg2", m.dg2)] {
            positive(key, v)?;
        }
        if m.diffusion == DiffusionFamily::Modulated && !(0.0..1.0).contains(&m.amplitude) {
            return Err(Error::validation("model.amplitude", format!("must lie in [0, 1), got {}", m.amplitude)));
        }
        if let ReactionModel::ModulatedExchange { amplitude, .. } = m.reaction {
            if !(0.0..1.0).contains(&amplitude) {
                return Err(Error::validation(
                    "model.reaction_params",
                    format!("modulation amplitude must lie in [0, 1), got {amplitude}"),
                ));
            }
        }
        if let Some(l) = m.lipschitz {
            non_negative("model.lipschitz", l)?;
        }
        if let Some(times) = &self.output.times {
            if times.is_empty() {
                return Err(Error::validation("output.times", "needs at least one time (or `auto`)"));
            }
            if times.iter().any(|&t| t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::validation("output.times", "times must be non-negative and increasing"));
            }
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(Error::validation("output.dir", "must not be empty"));
        }
        at_least_one("check.fields", self.check.fields)?;
        Ok(())
    }

    /// Output times for a run ending at `t_end`.
    pub fn output_times(&self, t_end: f64) -> Vec<f64> {
        match &self.output.times {
            Some(t) => t.clone(),
            None => (0..=10).map(|k| t_end * k as f64 / 10.0).collect(),
        }
    }

    /// Value of a key in normalized form.
    pub fn get(&self, key: &str) -> Option<String> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let recip = |n: usize| format!("1/{n}");
        Some(match key {
            "geometry.radius" => self.geometry.radius.to_string(),
            "geometry.center" => join(&self.geometry.center),
            "geometry.clearance" => self.geometry.clearance.to_string(),
            "geometry.mesh_file" => self.geometry.mesh_file.as_ref().map_or(String::new(), |p| p.display().to_string()),
            "cell.h" => self.cell.h.to_string(),
            "macro.h" => recip(self.macro_.n),
            "macro.dt" => self.macro_.dt.to_string(),
            "macro.T" => self.macro_.t_end.to_string(),
            "micro.epsilon" => recip(self.micro.n),
            "micro.cell_h" => self.micro.cell_h.to_string(),
            "micro.dt" => self.micro.dt.to_string(),
            "micro.T" => self.micro.t_end.to_string(),
            "micro.trace_theta" => self.micro.trace_theta.to_string(),
            "sweep.epsilons" => self.sweep.ns.iter().map(|&n| recip(n)).collect::<Vec<_>>().join(", "),
            "sweep.cell_h" => self.sweep.cell_h.to_string(),
            "sweep.macro_h" => recip(self.sweep.macro_n),
            "sweep.dt" => self.sweep.dt.to_string(),
            "sweep.T" => self.sweep.t_end.to_string(),
            "sweep.snapshots" => self.sweep.snapshots.to_string(),
            "model.diffusion" => match self.model.diffusion {
                DiffusionFamily::Constant => "constant".into(),
                DiffusionFamily::Modulated => "modulated".into(),
            },
            "model.d1" => self.model.d1.to_string(),
            "model.d2" => self.model.d2.to_string(),
            "model.dg1" => self.model.dg1.to_string(),
            "model.dg2" => self.model.dg2.to_string(),
            "model.amplitude" => self.model.amplitude.to_string(),
            "model.reaction" => self.model.reaction.name().into(),
            "model.reaction_params" => join(&reaction_params(&self.model.reaction)),
            "model.lipschitz" => self.model.lipschitz.map_or("auto".into(), |l| l.to_string()),
            "initial.u1_mean" => self.initial.u1_mean.to_string(),
            "initial.u1_amplitude" => self.initial.u1_amplitude.to_string(),
            "initial.u2_mean" => self.initial.u2_mean.to_string(),
            "initial.u2_amplitude" => self.initial.u2_amplitude.to_string(),
            "output.times" => self.output.times.as_ref().map_or("auto".into(), |t| join(t)),
            "output.dir" => self.output.dir.display().to_string(),
            "check.seed" => self.check.seed.to_string(),
            "check.fields" => self.check.fields.to_string(),
            _ => return None,
        })
    }

    /// Normalized text form; parsing it yields the same configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for key in KEYS {
            let (s, name) = key.split_once('.').expect("keys are dotted");
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                section = s;
            }
            let _ = writeln!(out, "{name} = {}", self.get(key).expect("listed key"));
        }
        out
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
