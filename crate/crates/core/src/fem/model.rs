use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Phase, Point};

pub type Tensor = [[f64; 2]; 2];

pub const IDENTITY: Tensor = [[1.0, 0.0], [0.0, 1.0]];

/// Periodic bump `cos(2πy₁)·cos(2πy₂)` used by the modulated families.
fn bump(y: Point) -> f64 {
    (2.0 * PI * y[0]).cos() * (2.0 * PI * y[1]).cos()
}

/// Y-periodic symmetric tensor coefficient.
#[derive(Clone)]
pub enum TensorField {
    Constant(Tensor),
    /// `base · (1 + amplitude · cos(2πy₁)cos(2πy₂))`
    Modulated { base: Tensor, amplitude: f64 },
    Custom(Arc<dyn Fn(Point) -> Tensor + Send + Sync>),
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(d) => f.debug_tuple("Constant").field(d).finish(),
            Self::Modulated { base, amplitude } => f
                .debug_struct("Modulated")
                .field("base", base)
                .field("amplitude", amplitude)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl TensorField {
    pub fn isotropic(d: f64) -> Self {
        Self::Constant([[d, 0.0], [0.0, d]])
    }

    pub fn eval(&self, y: Point) -> Tensor {
        match self {
            Self::Constant(d) => *d,
            Self::Modulated { base, amplitude } => {
                let s = 1.0 + amplitude * bump(y);
                [[s * base[0][0], s * base[0][1]], [s * base[1][0], s * base[1][1]]]
            }
            Self::Custom(f) => f(y),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            Self::Constant(d) => Self::Constant(scale_tensor(d, alpha)),
            Self::Modulated { base, amplitude } => Self::Modulated {
                base: scale_tensor(base, alpha),
                amplitude: *amplitude,
            },
            Self::Custom(f) => {
                let f = f.clone();
                Self::Custom(Arc::new(move |y| scale_tensor(&f(y), alpha)))
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

fn scale_tensor(d: &Tensor, alpha: f64) -> Tensor {
    [[alpha * d[0][0], alpha * d[0][1]], [alpha * d[1][0], alpha * d[1][1]]]
}

/// Smallest eigenvalue of the symmetric part of `d`.
pub fn min_eigenvalue(d: &Tensor) -> f64 {
    let (a, b, c) = (d[0][0], 0.5 * (d[0][1] + d[1][0]), d[1][1]);
    0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

/// Y-periodic scalar coefficient (tangential diffusivity on Γ).
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// `base · (1 + amplitude · cos(2πy₁)cos(2πy₂))`
    Modulated { base: f64, amplitude: f64 },
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(d) => f.debug_tuple("Constant").field(d).finish(),
            Self::Modulated { base, amplitude } => f
                .debug_struct("Modulated")
                .field("base", base)
                .field("amplitude", amplitude)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ScalarField {
    pub fn eval(&self, y: Point) -> f64 {
        match self {
            Self::Constant(d) => *d,
            Self::Modulated { base, amplitude } => base * (1.0 + amplitude * bump(y)),
            Self::Custom(f) => f(y),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            Self::Constant(d) => Self::Constant(alpha * d),
            Self::Modulated { base, amplitude } => Self::Modulated {
                base: alpha * base,
                amplitude: *amplitude,
            },
            Self::Custom(f) => {
                let f = f.clone();
                Self::Custom(Arc::new(move |y| alpha * f(y)))
            }
        }
    }
}

/// Bulk tensors `D¹, D²`, tangential diffusivities `D_Γ¹, D_Γ²` and the
/// coercivity constant they are checked against.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    pub d1: TensorField,
    pub d2: TensorField,
    pub dg1: ScalarField,
    pub dg2: ScalarField,
    pub c0: f64,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        Self::isotropic(1.0, 1.0, 1.0, 1.0)
    }
}

impl DiffusionSpec {
    pub fn isotropic(d1: f64, d2: f64, dg1: f64, dg2: f64) -> Self {
        Self {
            d1: TensorField::isotropic(d1),
            d2: TensorField::isotropic(d2),
            dg1: ScalarField::Constant(dg1),
            dg2: ScalarField::Constant(dg2),
            c0: d1.min(d2).min(dg1).min(dg2),
        }
    }

    pub fn bulk(&self, phase: Phase) -> &TensorField {
        match phase {
            Phase::Y1 => &self.d1,
            Phase::Y2 => &self.d2,
        }
    }

    pub fn surface(&self, phase: Phase) -> &ScalarField {
        match phase {
            Phase::Y1 => &self.dg1,
            Phase::Y2 => &self.dg2,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            d1: self.d1.scaled(alpha),
            d2: self.d2.scaled(alpha),
            dg1: self.dg1.scaled(alpha),
            dg2: self.dg2.scaled(alpha),
            c0: alpha * self.c0,
        }
    }

    /// Spot-checks symmetry and coercivity on a `samples × samples` grid of Y.
    pub fn validate(&self, samples: usize) -> Result<()> {
        if !(self.c0 > 0.0) {
            return Err(Error::validation("model.c0", "coercivity constant must be positive"));
        }
        let n = samples.max(1);
        for i in 0..n {
            for j in 0..n {
                let y = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                for (name, d) in [("D1", self.d1.eval(y)), ("D2", self.d2.eval(y))] {
                    if d.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(Error::Evaluation(format!("{name}({y:?}) is not finite")));
                    }
                    let scale = d.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                    if (d[0][1] - d[1][0]).abs() > 1e-12 * scale.max(1.0) {
                        return Err(Error::validation("model.diffusion", format!("{name} is not symmetric at {y:?}")));
                    }
                    if min_eigenvalue(&d) < self.c0 * (1.0 - 1e-12) {
                        return Err(Error::validation(
                            "model.diffusion",
                            format!("{name} violates coercivity with c0 = {} at {y:?}", self.c0),
                        ));
                    }
                }
                for (name, g) in [("DG1", self.dg1.eval(y)), ("DG2", self.dg2.eval(y))] {
                    if !g.is_finite() {
                        return Err(Error::Evaluation(format!("{name}({y:?}) is not finite")));
                    }
                    if g < self.c0 * (1.0 - 1e-12) {
                        return Err(Error::validation(
                            "model.diffusion",
                            format!("{name} = {g} below c0 = {} at {y:?}", self.c0),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reaction kinetics: bulk rates `f^j(t, y, z)` and interface rates
/// `h^j(t, y, z₁, z₂)`, all Y-periodic in `y`.
pub trait Kinetics: Send + Sync + fmt::Debug {
    fn bulk_rate(&self, phase: Phase, t: f64, y: Point, z: f64) -> f64;
    fn surface_rate(&self, phase: Phase, t: f64, y: Point, z1: f64, z2: f64) -> f64;
    /// Lipschitz constant in the concentration arguments (ℓ¹ norm for `h`).
    fn lipschitz_bound(&self) -> f64;
    /// Bound on `|f^j|, |h^j|`; infinite when unbounded.
    fn sup_bound(&self) -> f64;
    /// True when no rate depends on `y`, so cell averages reduce to `|Y_j|·f`.
    fn is_y_independent(&self) -> bool;
}

/// The catalog of reaction families selectable from a configuration file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionModel {
    None,
    /// `f^j(z) = −k_j z`
    Linear { k1: f64, k2: f64 },
    /// `h¹ = rate·(z₂ − z₁)`, `h² = −h¹`
    Exchange { rate: f64 },
    /// `f^j(z) = r_j·s(1 − s)` with `s = clamp(z, 0, 1)`
    LogisticTruncated { r1: f64, r2: f64 },
    /// `h¹ = rate·(1 + amplitude·cos(2πy₁)cos(2πy₂))·(z₂ − z₁)`, `h² = −h¹`
    ModulatedExchange { rate: f64, amplitude: f64 },
}

impl ReactionModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Linear { .. } => "linear",
            Self::Exchange { .. } => "exchange",
            Self::LogisticTruncated { .. } => "logistic",
            Self::ModulatedExchange { .. } => "modulated_exchange",
        }
    }

    fn exchange_coefficient(&self, y: Point) -> f64 {
        match *self {
            Self::Exchange { rate } => rate,
            Self::ModulatedExchange { rate, amplitude } => rate * (1.0 + amplitude * bump(y)),
            _ => 0.0,
        }
    }
}

impl Kinetics for ReactionModel {
    fn bulk_rate(&self, phase: Phase, _t: f64, _y: Point, z: f64) -> f64 {
        match *self {
            Self::Linear { k1, k2 } => match phase {
                Phase::Y1 => -k1 * z,
                Phase::Y2 => -k2 * z,
            },
            Self::LogisticTruncated { r1, r2 } => {
                let s = z.clamp(0.0, 1.0);
                let r = if phase == Phase::Y1 { r1 } else { r2 };
                r * s * (1.0 - s)
            }
            _ => 0.0,
        }
    }

    fn surface_rate(&self, phase: Phase, _t: f64, y: Point, z1: f64, z2: f64) -> f64 {
        let g = self.exchange_coefficient(y) * (z2 - z1);
        match phase {
            Phase::Y1 => g,
            Phase::Y2 => -g,
        }
    }

    fn lipschitz_bound(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Linear { k1, k2 } => k1.abs().max(k2.abs()),
            Self::Exchange { rate } => rate.abs(),
            Self::LogisticTruncated { r1, r2 } => r1.abs().max(r2.abs()),
            Self::ModulatedExchange { rate, amplitude } => rate.abs() * (1.0 + amplitude.abs()),
        }
    }

    fn sup_bound(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::LogisticTruncated { r1, r2 } => 0.25 * r1.abs().max(r2.abs()),
            _ => f64::INFINITY,
        }
    }

    fn is_y_independent(&self) -> bool {
        !matches!(self, Self::ModulatedExchange { amplitude, .. } if *amplitude != 0.0)
    }
}

/// Kinetics together with the declared Lipschitz and sup bounds that the
/// solvers rely on for their step-size checks.
#[derive(Debug, Clone)]
pub struct ReactionSpec {
    pub kinetics: Arc<dyn Kinetics>,
    pub lipschitz_bound: f64,
    pub sup_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub declared: f64,
    pub observed: f64,
    pub samples: usize,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.observed <= self.declared * (1.0 + 1e-12) + 1e-14
    }
}

impl ReactionSpec {
    pub fn new(kinetics: Arc<dyn Kinetics>) -> Self {
        Self {
            lipschitz_bound: kinetics.lipschitz_bound(),
            sup_bound: kinetics.sup_bound(),
            kinetics,
        }
    }

    pub fn from_model(model: ReactionModel) -> Self {
        Self::new(Arc::new(model))
    }

    pub fn none() -> Self {
        Self::from_model(ReactionModel::None)
    }

    /// Overrides the declared Lipschitz constant (for instance from a config file).
    pub fn with_declared_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz_bound = bound;
        self
    }

    pub fn bulk_rate(&self, phase: Phase, t: f64, y: Point, z: f64) -> f64 {
        self.kinetics.bulk_rate(phase, t, y, z)
    }

    pub fn surface_rate(&self, phase: Phase, t: f64, y: Point, z1: f64, z2: f64) -> f64 {
        self.kinetics.surface_rate(phase, t, y, z1, z2)
    }

    /// Largest difference quotient of all rates over random pairs of states
    /// in `[-range, range]`, compared with the declared bound.
    pub fn sample_lipschitz(&self, seed: u64, samples: usize, range: f64) -> LipschitzReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut observed = 0.0f64;
        for _ in 0..samples {
            let t: f64 = rng.gen_range(0.0..1.0);
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let z = [rng.gen_range(-range..range), rng.gen_range(-range..range)];
            let w = [rng.gen_range(-range..range), rng.gen_range(-range..range)];
            for phase in Phase::BOTH {
                let dz = (z[0] - w[0]).abs();
                if dz > 0.0 {
                    let df = self.bulk_rate(phase, t, y, z[0]) - self.bulk_rate(phase, t, y, w[0]);
                    observed = observed.max(df.abs() / dz);
                }
                let dzw = (z[0] - w[0]).abs() + (z[1] - w[1]).abs();
                if dzw > 0.0 {
                    let dh = self.surface_rate(phase, t, y, z[0], z[1])
                        - self.surface_rate(phase, t, y, w[0], w[1]);
                    observed = observed.max(dh.abs() / dzw);
                }
            }
        }
        LipschitzReport {
            declared: self.lipschitz_bound,
            observed,
            samples,
        }
    }
}
