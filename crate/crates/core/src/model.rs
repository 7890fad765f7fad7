//! The model problem: parameters, the fixed trapping potential `V`, the
//! configurable complex-potential profile `W`, the angular-mode reduction and
//! initial data.
//!
//! Each spherical-harmonic degree `ℓ` evolves independently under
//!
//! ```text
//! -∂t²u + ∂x²u - (ℓ(ℓ+1) + N) V(x) u + iεW(x) u = 0,   V(x) = 1/(1+x²)
//! ```
//!
//! so the simulation works with one complex scalar field per mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Complex = Complex64;

/// Relative amplitude below which Gaussian data is truncated to zero.
pub const DATA_TRUNCATION: f64 = 1e-16;

/// Scalar parameters of the model and of the refined multiplier argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Strength of the imaginary potential.
    pub epsilon: f64,
    /// Shift added to the angular eigenvalue.
    pub big_n: f64,
    /// Weight of the `arctan²` correction in the classical multiplier.
    pub delta: f64,
    /// Frequency-rescaling exponent of the refined multiplier.
    pub alpha: f64,
    /// Large constant used to absorb the negative part of the refined bulk.
    pub m_const: f64,
    /// Time horizon of the windowed analysis.
    pub t_horizon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            big_n: 20.0,
            delta: 0.05,
            alpha: 0.4,
            m_const: 700.0,
            t_horizon: 50.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.epsilon,
            self.big_n,
            self.delta,
            self.alpha,
            self.m_const,
            self.t_horizon,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("model", "all parameters must be finite"));
        }
        if self.epsilon < 0.0 {
            return Err(invalid("epsilon", "must be >= 0"));
        }
        if self.big_n <= 0.0 {
            return Err(invalid("big_n", "must be > 0"));
        }
        if self.delta < 0.0 {
            return Err(invalid("delta", "must be >= 0"));
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(invalid("alpha", "must lie in [0, 1/2]"));
        }
        if self.m_const <= 0.0 {
            return Err(invalid("m_const", "must be > 0"));
        }
        let floor = if self.epsilon > 0.0 {
            (-self.epsilon.ln()).max(2.0)
        } else {
            2.0
        };
        if self.t_horizon <= floor {
            return Err(invalid(
                "t_horizon",
                format!("must exceed max(-ln(epsilon), 2) = {floor:.4}"),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    /// `exp(-r²/(1-r²))` on `|r| < 1`.
    Bump,
    /// Flat-topped variant `exp(-r⁴/(1-r⁴))` on `|r| < 1`.
    ScaledBump,
}

/// Smooth, real, compactly supported profile of the imaginary potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialProfile {
    pub shape: ProfileShape,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for PotentialProfile {
    fn default() -> Self {
        Self {
            shape: ProfileShape::Bump,
            center: 0.0,
            width: 1.0,
            amplitude: 1.0,
        }
    }
}

impl PotentialProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(invalid("potential.width", "must be > 0"));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(invalid("potential.amplitude", "must lie in (0, 1]"));
        }
        if !self.center.is_finite() {
            return Err(invalid("potential.center", "must be finite"));
        }
        Ok(())
    }

    /// Closed support interval `[center - width, center + width]`.
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }
}

/// One spherical-harmonic degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub ell: u32,
}

impl Mode {
    pub fn new(ell: u32) -> Self {
        Self { ell }
    }

    /// `ℓ(ℓ+1)`, the eigenvalue of `-Δ_S` on this degree.
    pub fn angular_eigenvalue(&self) -> f64 {
        let l = self.ell as f64;
        l * (l + 1.0)
    }

    /// Number of degenerate `m` values, `2ℓ+1`.
    pub fn multiplicity(&self) -> u32 {
        2 * self.ell + 1
    }
}

/// `V(x) = 1/(1+x²)`.
pub fn potential_v(x: f64) -> f64 {
    1.0 / (1.0 + x * x)
}

/// `V'(x)`.
pub fn potential_v_prime(x: f64) -> f64 {
    let d = 1.0 + x * x;
    -2.0 * x / (d * d)
}

/// Evaluate the imaginary-potential profile `W` at `x`.
pub fn potential_w(profile: &PotentialProfile, x: f64) -> f64 {
    let r = (x - profile.center) / profile.width;
    let r2 = r * r;
    if r2 >= 1.0 {
        return 0.0;
    }
    let shape = match profile.shape {
        ProfileShape::Bump => (-r2 / (1.0 - r2)).exp(),
        ProfileShape::ScaledBump => {
            let r4 = r2 * r2;
            (-r4 / (1.0 - r4)).exp()
        }
    };
    profile.amplitude * shape
}

/// Per-mode real potential `(ℓ(ℓ+1) + N) V(x)`.
pub fn mode_equation_coefficient(params: &ModelParams, mode: Mode, x: f64) -> f64 {
    (mode.angular_eigenvalue() + params.big_n) * potential_v(x)
}

/// The fixed parts of one simulation: scalar parameters plus the `W` profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelProblem {
    pub params: ModelParams,
    pub profile: PotentialProfile,
}

impl ModelProblem {
    pub fn new(params: ModelParams, profile: PotentialProfile) -> Self {
        Self { params, profile }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.profile.validate()
    }

    pub fn w(&self, x: f64) -> f64 {
        potential_w(&self.profile, x)
    }

    pub fn mode_coefficient(&self, mode: Mode, x: f64) -> f64 {
        mode_equation_coefficient(&self.params, mode, x)
    }
}

/// Uniform grid on `[-L, L]` with a fixed time step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_length: f64,
    pub n_points: usize,
    pub dt: f64,
}

impl GridSpec {
    /// Build a grid whose spacing is exactly `spacing`.
    ///
    /// The half length is rounded up to a multiple of the spacing (so `x = 0`
    /// is a node) and `dt` is the largest value `1/m ≤ cfl·h` with integer
    /// `m`, so integer times are hit exactly.
    pub fn from_spacing(half_length: f64, spacing: f64, cfl: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("grid.spacing", "must be > 0"));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(invalid("grid.cfl", "must lie in (0, 1]"));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(invalid("grid.half_length", "must be > 0"));
        }
        let cells = (half_length / spacing - 1e-9).ceil().max(1.0) as usize;
        let half_length = cells as f64 * spacing;
        let steps_per_unit = (1.0 / (cfl * spacing) - 1e-9).ceil();
        let grid = Self {
            half_length,
            n_points: 2 * cells + 1,
            dt: 1.0 / steps_per_unit,
        };
        grid.validate(cfl)?;
        Ok(grid)
    }

    pub fn validate(&self, cfl_factor: f64) -> Result<()> {
        if self.n_points < 7 {
            return Err(invalid("grid.n_points", "need at least 7 points"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("grid.dt", "must be > 0"));
        }
        if cfl_factor > 1.0 {
            return Err(invalid("grid.cfl", "cfl factor must be <= 1"));
        }
        if self.dt > cfl_factor * self.spacing() * (1.0 + 1e-12) {
            return Err(invalid(
                "grid.dt",
                format!("dt = {} exceeds cfl * h = {}", self.dt, cfl_factor * self.spacing()),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index range `[lo, hi)` of nodes with `a ≤ x ≤ b` (with a small
    /// tolerance so nodes that sit on the endpoints are included).
    pub fn index_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let h = self.spacing();
        let lo = ((a + self.half_length) / h - 1e-9).ceil().max(0.0) as usize;
        let hi = (((b + self.half_length) / h + 1e-9).floor() as isize + 1).clamp(0, self.n_points as isize) as usize;
        lo.min(hi)..hi
    }
}

/// Field and velocity of one mode at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeState {
    pub u: Vec<Complex>,
    pub v: Vec<Complex>,
    pub time: f64,
}

impl ModeState {
    pub fn zeros(n: usize, time: f64) -> Self {
        Self {
            u: vec![Complex::new(0.0, 0.0); n],
            v: vec![Complex::new(0.0, 0.0); n],
            time,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.u
            .iter()
            .chain(self.v.iter())
            .fold(0.0_f64, |m, z| nan_max(m, z.norm()))
    }

    /// Largest amplitude among the `width` nodes next to either boundary.
    pub fn boundary_amplitude(&self, width: usize) -> f64 {
        let n = self.len();
        let w = width.min(n);
        (0..w)
            .chain(n - w..n)
            .map(|i| nan_max(self.u[i].norm(), self.v[i].norm()))
            .fold(0.0, nan_max)
    }

    pub fn scaled(&self, c: Complex) -> Self {
        Self {
            u: self.u.iter().map(|z| z * c).collect(),
            v: self.v.iter().map(|z| z * c).collect(),
            time: self.time,
        }
    }
}

/// `max` that propagates NaN, so blow-up is never masked.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Real,
    Imaginary,
    Complex,
}

impl Phase {
    fn factor(self) -> Complex {
        match self {
            Phase::Real => Complex::new(1.0, 0.0),
            Phase::Imaginary => Complex::new(0.0, 1.0),
            Phase::Complex => Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityProfile {
    /// `∂t u = 0`.
    Zero,
    /// `∂t u = -∂x u`, a packet moving to the right at unit speed.
    Rightward,
}

/// Gaussian wave packet `amplitude · exp(-(x-c)²/w²) · exp(ikx)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianData {
    pub center: f64,
    pub width: f64,
    pub wavenumber: f64,
    pub phase: Phase,
    pub velocity: VelocityProfile,
    pub amplitude: f64,
}

impl Default for GaussianData {
    fn default() -> Self {
        Self {
            center: 0.0,
            width: 1.0,
            wavenumber: 0.0,
            phase: Phase::Real,
            velocity: VelocityProfile::Zero,
            amplitude: 1.0,
        }
    }
}

impl GaussianData {
    /// Half width of the region where the envelope exceeds the truncation level.
    pub fn support_radius(&self) -> f64 {
        self.width * (-DATA_TRUNCATION.ln()).sqrt()
    }
}

/// Sample Gaussian initial data on `grid` at `time`.
///
/// The envelope is cut to zero below [`DATA_TRUNCATION`]; the remaining
/// support must sit inside `[-L + 10, L - 10]`.
pub fn initial_data_gaussian(grid: &GridSpec, data: &GaussianData, time: f64) -> Result<ModeState> {
    if !(data.width > 0.0 && data.width.is_finite()) {
        return Err(invalid("data.width", "must be > 0"));
    }
    let radius = data.support_radius();
    let (lo, hi) = (data.center - radius, data.center + radius);
    let (min, max) = (-grid.half_length + 10.0, grid.half_length - 10.0);
    if lo < min || hi > max {
        return Err(Error::SupportViolation { lo, hi, min, max });
    }
    let rot = data.phase.factor() * data.amplitude;
    let mut state = ModeState::zeros(grid.n_points, time);
    for i in 0..grid.n_points {
        let x = grid.x(i);
        let r = (x - data.center) / data.width;
        let envelope = (-r * r).exp();
        if envelope < DATA_TRUNCATION {
            continue;
        }
        let carrier = Complex::from_polar(1.0, data.wavenumber * x);
        let u = rot * envelope * carrier;
        state.u[i] = u;
        if data.velocity == VelocityProfile::Rightward {
            let du = u * Complex::new(-2.0 * (x - data.center) / (data.width * data.width), data.wavenumber);
            state.v[i] = -du;
        }
    }
    Ok(state)
}
