//! Multipliers `f∂x + q`, smooth cutoffs and the pointwise divergence
//! identities they generate.
//!
//! For real `f(x)`, `q(x)` and any smooth field `u` of one angular mode
//! (angular eigenvalue `λ = ℓ(ℓ+1)`),
//!
//! ```text
//! Re((f ∂x ū + q ū) · L u) = ∂t p_t + ∂x p_x
//!     + (-f'/2 + q)|∂t u|² - (f'/2 + q)|∂x u|²
//!     + λ c_ω |u|² + (N c_ω + q''/2)|u|² - ε f W Im(∂x ū · u)
//! ```
//!
//! with `L u = -∂t²u + ∂x²u - (λ+N)V u + iεW u`, `c_ω = (f'/2 - q)V + f V'/2`,
//!
//! ```text
//! p_t = -Re((f ∂x ū + q ū) ∂t u)
//! p_x = f|∂t u|²/2 + f|∂x u|²/2 - f V λ|u|²/2 + q Re(ū ∂x u) - (N f V + q')|u|²/2.
//! ```
//!
//! The angular flux integrates to zero over the sphere and is dropped. After a
//! Fourier transform in time, `-∂t²` becomes `τ²`, `|∂t u|²` becomes `τ²|û|²`
//! and the `p_t` term disappears.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fd::{d1_at, d2_at};
use crate::model::{potential_v, potential_v_prime, Complex, Mode, ModelParams, ModelProblem, PotentialProfile};
use crate::solver::Trajectory;

/// Default smoothness order of the cutoff ramps (`C^4`, degree 9).
pub const DEFAULT_RAMP_ORDER: u32 = 4;

/// Polynomial smoothstep ramp of order `k`: degree `2k+1`, `C^k` at both
/// ends, monotone on `[0, 1]`, `S(1/2) = 1/2`. Order 2 is the quintic
/// `r³(10 - 15r + 6r²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ramp {
    order: u32,
    /// Monomial coefficients, `coeffs[j]` multiplies `r^j`.
    coeffs: Vec<f64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Ramp {
    pub fn smoothstep(order: u32) -> Self {
        let k = order;
        let mut coeffs = vec![0.0; (2 * k + 2) as usize];
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[(k + 1 + j) as usize] = sign * binomial(k + j, j) * binomial(2 * k + 1, k - j);
        }
        Self { order, coeffs }
    }

    pub fn quintic() -> Self {
        Self::smoothstep(2)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `(S, S', S'')` at `r`, clamped outside `[0, 1]`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if r >= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        // S(r) = 1 - S(1-r); the monomial form is only accurate near 0.
        if r > 0.5 {
            let (s, s1, s2) = self.eval(1.0 - r);
            return (1.0 - s, s1, -s2);
        }
        let (mut s, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (j, &c) in self.coeffs.iter().enumerate().rev() {
            let jf = j as f64;
            s = s * r + c;
            if j >= 1 {
                s1 = s1 * r + jf * c;
            }
            if j >= 2 {
                s2 = s2 * r + jf * (jf - 1.0) * c;
            }
        }
        (s, s1, s2)
    }

    /// `sup (|S'| + |S''|)` over the ramp, by dense sampling.
    pub fn derivative_bound(&self) -> f64 {
        (0..=20_000)
            .map(|i| {
                let (_, a, b) = self.eval(i as f64 / 20_000.0);
                a.abs() + b.abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Default for Ramp {
    fn default() -> Self {
        Self::smoothstep(DEFAULT_RAMP_ORDER)
    }
}

/// Smooth characteristic function of a union of intervals: `1` on each
/// `[a, b]`, supported on `[a-1, b+1]`, monotone on the unit ramps.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothCharacteristic {
    intervals: Vec<(f64, f64)>,
    ramp: Ramp,
}

impl SmoothCharacteristic {
    pub fn new(intervals: &[(f64, f64)], ramp: Ramp) -> Result<Self> {
        if intervals.is_empty() {
            return Err(invalid("cutoff", "needs at least one interval"));
        }
        let mut sorted = intervals.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(a, b) in &sorted {
            if !(b >= a) {
                return Err(invalid("cutoff", format!("interval [{a}, {b}] is reversed")));
            }
        }
        for w in sorted.windows(2) {
            if w[1].0 - w[0].1 < 2.0 {
                return Err(invalid("cutoff", "intervals must be separated by at least 2"));
            }
        }
        Ok(Self {
            intervals: sorted,
            ramp,
        })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn ramp(&self) -> &Ramp {
        &self.ramp
    }

    /// `(χ, χ', χ'')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for &(a, b) in &self.intervals {
            let (v, d1, d2) = if t < a - 1.0 || t > b + 1.0 {
                (0.0, 0.0, 0.0)
            } else if t < a {
                self.ramp.eval(t - (a - 1.0))
            } else if t <= b {
                (1.0, 0.0, 0.0)
            } else {
                let (s, s1, s2) = self.ramp.eval(b + 1.0 - t);
                (s, -s1, s2)
            };
            out.0 += v;
            out.1 += d1;
            out.2 += d2;
        }
        out
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Closed support `[a₀ - 1, b_last + 1]`.
    pub fn support(&self) -> (f64, f64) {
        (
            self.intervals[0].0 - 1.0,
            self.intervals[self.intervals.len() - 1].1 + 1.0,
        )
    }
}

/// Cutoff between `a` and `b` with the default ramp.
pub fn smooth_characteristic(a: f64, b: f64) -> Result<SmoothCharacteristic> {
    SmoothCharacteristic::new(&[(a, b)], Ramp::default())
}

/// The three cutoffs of the windowed analysis on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    pub t_horizon: f64,
    /// `1` on `[0, T]`.
    pub chi1: SmoothCharacteristic,
    /// `1` on `[-1, 0] ∪ [T, T+1]`.
    pub chi2: SmoothCharacteristic,
    /// `1` on `[-1, 1]` in `x`.
    pub chix: SmoothCharacteristic,
}

/// Outcome of the pointwise check `|χ₁'| + |χ₁''| ≤ C χ₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationCheck {
    pub holds: bool,
    /// Constant used in the check.
    pub constant: f64,
    /// Largest observed `(|χ₁'| + |χ₁''|) / χ₂` where `χ₂ > 0`.
    pub observed_ratio: f64,
    pub samples: usize,
}

impl WindowSet {
    pub fn new(t_horizon: f64) -> Result<Self> {
        Self::with_ramp(t_horizon, Ramp::default())
    }

    pub fn with_ramp(t_horizon: f64, ramp: Ramp) -> Result<Self> {
        if !(t_horizon > 2.0) {
            return Err(invalid("t_horizon", "windowed analysis needs T > 2"));
        }
        Ok(Self {
            t_horizon,
            chi1: SmoothCharacteristic::new(&[(0.0, t_horizon)], ramp.clone())?,
            chi2: SmoothCharacteristic::new(&[(-1.0, 0.0), (t_horizon, t_horizon + 1.0)], ramp.clone())?,
            chix: SmoothCharacteristic::new(&[(-1.0, 1.0)], ramp)?,
        })
    }

    /// The domination constant `sup(|S'| + |S''|)` of the ramp.
    pub fn domination_constant(&self) -> f64 {
        self.chi1.ramp().derivative_bound()
    }

    /// Check `|χ₁'| + |χ₁''| ≤ C χ₂` on `n` uniform samples of `[-3, T+3]`.
    pub fn check_domination(&self, n: usize) -> DominationCheck {
        let c = self.domination_constant();
        let (a, b) = (-3.0, self.t_horizon + 3.0);
        let mut holds = true;
        let mut observed: f64 = 0.0;
        for i in 0..n {
            let t = a + (b - a) * i as f64 / (n - 1).max(1) as f64;
            let (_, d1, d2) = self.chi1.eval(t);
            let lhs = d1.abs() + d2.abs();
            let chi2 = self.chi2.value(t);
            if lhs > c * chi2 * (1.0 + 1e-12) + 1e-14 {
                holds = false;
            }
            if chi2 > 0.0 {
                observed = observed.max(lhs / chi2);
            }
        }
        DominationCheck {
            holds,
            constant: c,
            observed_ratio: observed,
            samples: n,
        }
    }
}

/// Sign convention for `q` in the frequency-rescaled multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QSign {
    /// `q = f'/2 = -½ s/(1+s²x²)`; keeps every bulk term except `q''` and
    /// the `W` term nonnegative.
    #[default]
    HalfDerivative,
    /// `q = +½ s/(1+s²x²)`; makes the angular coefficient negative near 0.
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MultiplierKind {
    /// `f = -arctan x`, `q = f'/2 + δ arctan²x/(1+x²)`.
    Classical { delta: f64 },
    /// `f = -arctan(|τ|^α x)`, `q = ±f'/2`.
    Refined { tau: f64, alpha: f64, sign: QSign },
}

/// `f`, `q` and their derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MultiplierValues {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
}

/// A multiplier pair `(f, q)` with closed-form derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSet {
    pub kind: MultiplierKind,
}

pub fn classical_multiplier(delta: f64) -> Result<MultiplierSet> {
    if !(delta >= 0.0) {
        return Err(invalid("delta", "must be >= 0"));
    }
    Ok(MultiplierSet {
        kind: MultiplierKind::Classical { delta },
    })
}

pub fn refined_multiplier(tau: f64, alpha: f64) -> Result<MultiplierSet> {
    refined_multiplier_with_sign(tau, alpha, QSign::default())
}

pub fn refined_multiplier_with_sign(tau: f64, alpha: f64, sign: QSign) -> Result<MultiplierSet> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(invalid("alpha", "must lie in [0, 1/2]"));
    }
    if !tau.is_finite() {
        return Err(invalid("tau", "must be finite"));
    }
    Ok(MultiplierSet {
        kind: MultiplierKind::Refined { tau, alpha, sign },
    })
}

impl MultiplierSet {
    /// `|τ|^α`, with `τ = 0` mapped to `0` for every `α`.
    fn scale(tau: f64, alpha: f64) -> f64 {
        if tau == 0.0 {
            0.0
        } else {
            tau.abs().powf(alpha)
        }
    }

    pub fn eval(&self, x: f64) -> MultiplierValues {
        match self.kind {
            MultiplierKind::Classical { delta } => {
                let d = 1.0 + x * x;
                let a = x.atan();
                let f = -a;
                let f1 = -1.0 / d;
                let f2 = 2.0 * x / (d * d);
                let f3 = -2.0 * (3.0 * x * x - 1.0) / (d * d * d);
                // P = arctan²x / (1+x²)
                let p = a * a / d;
                let p1 = (2.0 * a - 2.0 * x * a * a) / (d * d);
                let p2 = (2.0 - 12.0 * x * a + a * a * (6.0 * x * x - 2.0)) / (d * d * d);
                MultiplierValues {
                    f,
                    f1,
                    f2,
                    f3,
                    q: 0.5 * f1 + delta * p,
                    q1: 0.5 * f2 + delta * p1,
                    q2: 0.5 * f3 + delta * p2,
                }
            }
            MultiplierKind::Refined { tau, alpha, sign } => {
                let s = Self::scale(tau, alpha);
                let y = s * x;
                let d = 1.0 + y * y;
                let s3 = s * s * s;
                let f = -y.atan();
                let f1 = -s / d;
                let f2 = 2.0 * s3 * x / (d * d);
                let f3 = -2.0 * s3 * (3.0 * y * y - 1.0) / (d * d * d);
                let sg = match sign {
                    QSign::HalfDerivative => 0.5,
                    QSign::Positive => -0.5,
                };
                MultiplierValues {
                    f,
                    f1,
                    f2,
                    f3,
                    q: sg * f1,
                    q1: sg * f2,
                    q2: sg * f3,
                }
            }
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        self.eval(x).f
    }

    pub fn q(&self, x: f64) -> f64 {
        self.eval(x).q
    }

    /// `sup |f|` over the line.
    pub fn sup_f(&self) -> f64 {
        match self.kind {
            MultiplierKind::Refined { tau, alpha, .. } if Self::scale(tau, alpha) == 0.0 => 0.0,
            _ => std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self.kind, MultiplierKind::Classical { .. })
    }
}

/// Coefficients of `|∂t u|²`, `|∂x u|²`, `|∂ω u|²` and `|u|²` in the bulk
/// of the multiplier identity.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BulkCoefficients {
    pub c_t: f64,
    pub c_x: f64,
    pub c_omega: f64,
    pub c_0: f64,
}

/// Bulk coefficients from the generic expressions in `f`, `q`.
pub fn bulk_from_multiplier(ms: &MultiplierSet, big_n: f64, x: f64) -> BulkCoefficients {
    let m = ms.eval(x);
    let v = potential_v(x);
    let c_omega = (0.5 * m.f1 - m.q) * v + 0.5 * m.f * potential_v_prime(x);
    BulkCoefficients {
        c_t: -0.5 * m.f1 + m.q,
        c_x: -(0.5 * m.f1 + m.q),
        c_omega,
        c_0: big_n * c_omega + 0.5 * m.q2,
    }
}

/// Bulk coefficients. For the classical multiplier these are the simplified
/// closed forms
///
/// ```text
/// c_t = δ arctan²x/(1+x²)          c_x = (1 - δ arctan²x)/(1+x²)
/// c_ω = (x arctan x - δ arctan²x)/(1+x²)²   c_0 = N c_ω + q''/2
/// ```
///
/// any other multiplier falls back to [`bulk_from_multiplier`].
pub fn bulk_coefficients(ms: &MultiplierSet, params: &ModelParams, x: f64) -> BulkCoefficients {
    match ms.kind {
        MultiplierKind::Classical { delta } => {
            let d = 1.0 + x * x;
            let a = x.atan();
            let c_omega = (x * a - delta * a * a) / (d * d);
            BulkCoefficients {
                c_t: delta * a * a / d,
                c_x: (1.0 - delta * a * a) / d,
                c_omega,
                c_0: params.big_n * c_omega + 0.5 * ms.eval(x).q2,
            }
        }
        MultiplierKind::Refined { .. } => bulk_from_multiplier(ms, params.big_n, x),
    }
}

/// Pointwise positivity of the classical bulk form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_c_x: f64,
    pub min_c_omega: f64,
    pub min_c_0: f64,
    /// `min_x [c_0 - (ε f W)²/(4 c_x)]`: the form `c_0|u|² + c_x|∂x u|² -
    /// ε f W Im(∂x ū u)` is nonnegative iff this and `c_x` are.
    pub margin: f64,
    pub argmin_x: f64,
    pub holds: bool,
}

/// Evaluate the classical bulk coefficients on `xs` and the margin of the
/// quadratic form that has to absorb the `W` term.
pub fn positivity_check(params: &ModelParams, profile: &PotentialProfile, xs: &[f64]) -> PositivityReport {
    let ms = MultiplierSet {
        kind: MultiplierKind::Classical { delta: params.delta },
    };
    let mut r = PositivityReport {
        min_c_x: f64::INFINITY,
        min_c_omega: f64::INFINITY,
        min_c_0: f64::INFINITY,
        margin: f64::INFINITY,
        argmin_x: f64::NAN,
        holds: true,
    };
    for &x in xs {
        let b = bulk_coefficients(&ms, params, x);
        let fw = params.epsilon * ms.f(x) * crate::model::potential_w(profile, x);
        let schur = if b.c_x > 0.0 {
            b.c_0 - fw * fw / (4.0 * b.c_x)
        } else if fw == 0.0 {
            b.c_0
        } else {
            f64::NEG_INFINITY
        };
        r.min_c_x = r.min_c_x.min(b.c_x);
        r.min_c_omega = r.min_c_omega.min(b.c_omega);
        r.min_c_0 = r.min_c_0.min(b.c_0);
        if schur < r.margin {
            r.margin = schur;
            r.argmin_x = x;
        }
    }
    r.holds = r.min_c_x >= 0.0 && r.min_c_omega >= 0.0 && r.margin >= 0.0;
    r
}

/// Uniform `(t, x)` sample layout of a space-time slab; data is stored
/// row-major with `x` fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabGrid {
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub x0: f64,
    pub h: f64,
    pub nx: usize,
}

impl SlabGrid {
    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }
    pub fn len(&self) -> usize {
        self.nt * self.nx
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Residual of the multiplier identity over a slab.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    /// Discrete `L¹` norm of `LHS - RHS`.
    pub l1: f64,
    /// Discrete `L¹` norm of the right-hand side terms, for scale.
    pub scale: f64,
}

/// Per-point identity terms shared by the time and frequency versions.
struct PointTerms {
    lhs: f64,
    px: f64,
    bulk: f64,
}

#[allow(clippy::too_many_arguments)]
fn point_terms(
    m: &MultiplierValues,
    x: f64,
    lambda: f64,
    big_n: f64,
    eps_w: f64,
    u: Complex,
    ux: Complex,
    dt_u_sq: f64,
    op: Complex,
) -> PointTerms {
    let v = potential_v(x);
    let vp = potential_v_prime(x);
    let mult = ux.conj() * m.f + u.conj() * m.q;
    let lhs = (mult * op).re;
    let u2 = u.norm_sqr();
    let ux2 = ux.norm_sqr();
    let c_omega = (0.5 * m.f1 - m.q) * v + 0.5 * m.f * vp;
    let bulk = (-0.5 * m.f1 + m.q) * dt_u_sq - (0.5 * m.f1 + m.q) * ux2
        + lambda * c_omega * u2
        + (big_n * c_omega + 0.5 * m.q2) * u2
        - eps_w * m.f * (ux.conj() * u).im;
    let px = 0.5 * m.f * dt_u_sq + 0.5 * m.f * ux2 - 0.5 * m.f * v * lambda * u2 + m.q * (u.conj() * ux).re
        - 0.5 * (big_n * m.f * v + m.q1) * u2;
    PointTerms { lhs, px, bulk }
}

/// Time-domain identity residual for samples `u`, `v = ∂t u` on `slab`.
///
/// All derivatives use the fourth-order stencils; `∂t²u` is the time
/// derivative of `v`. The residual is evaluated on nodes at least two
/// stencil widths from the slab edges.
pub fn identity_residual_slab(
    u: &[Complex],
    v: &[Complex],
    slab: &SlabGrid,
    ms: &MultiplierSet,
    problem: &ModelProblem,
    mode: Mode,
) -> Result<IdentityResidual> {
    let (nt, nx) = (slab.nt, slab.nx);
    if u.len() != slab.len() || v.len() != slab.len() {
        return Err(Error::Precondition("slab data has the wrong length".into()));
    }
    if nt < 5 || nx < 9 {
        return Err(Error::Precondition("slab too small for the residual stencils".into()));
    }
    let lambda = mode.angular_eigenvalue();
    let big_n = problem.params.big_n;
    let eps = problem.params.epsilon;
    let h = slab.h;
    let mvals: Vec<MultiplierValues> = (0..nx).map(|i| ms.eval(slab.x(i))).collect();
    let kv: Vec<f64> = (0..nx).map(|i| problem.mode_coefficient(mode, slab.x(i))).collect();
    let ew: Vec<f64> = (0..nx).map(|i| eps * problem.w(slab.x(i))).collect();

    // p_t on every row (needed for the time derivative), p_x and the rest on
    // the rows where the residual is evaluated.
    let mut pt = vec![0.0; nt * nx];
    for n in 0..nt {
        let row_u = &u[n * nx..(n + 1) * nx];
        let row_v = &v[n * nx..(n + 1) * nx];
        for i in 2..nx - 2 {
            let ux = d1_at(row_u, i, h);
            let mult = ux.conj() * mvals[i].f + row_u[i].conj() * mvals[i].q;
            pt[n * nx + i] = -(mult * row_v[i]).re;
        }
    }
    let mut l1 = 0.0;
    let mut scale = 0.0;
    let mut px = vec![0.0; nx];
    let mut rest = vec![0.0; nx];
    for n in 2..nt - 2 {
        let row_u = &u[n * nx..(n + 1) * nx];
        let row_v = &v[n * nx..(n + 1) * nx];
        for i in 2..nx - 2 {
            let x = slab.x(i);
            let ux = d1_at(row_u, i, h);
            let uxx = d2_at(row_u, i, h);
            let vt = (v[(n + 1) * nx + i] - v[(n - 1) * nx + i]) * (8.0 / (12.0 * slab.dt))
                - (v[(n + 2) * nx + i] - v[(n - 2) * nx + i]) * (1.0 / (12.0 * slab.dt));
            let op = -vt + uxx - row_u[i] * kv[i] + Complex::new(0.0, ew[i]) * row_u[i];
            let t = point_terms(
                &mvals[i],
                x,
                lambda,
                big_n,
                ew[i],
                row_u[i],
                ux,
                row_v[i].norm_sqr(),
                op,
            );
            px[i] = t.px;
            let ptt = ((pt[(n + 1) * nx + i] - pt[(n - 1) * nx + i]) * 8.0
                - (pt[(n + 2) * nx + i] - pt[(n - 2) * nx + i]))
                / (12.0 * slab.dt);
            rest[i] = t.lhs - t.bulk - ptt;
        }
        for i in 4..nx - 4 {
            let dpx = d1_at(&px, i, h);
            l1 += (rest[i] - dpx).abs();
            scale += (rest[i] + dpx).abs() + (rest[i] - dpx).abs();
        }
    }
    let w = h * slab.dt;
    Ok(IdentityResidual {
        l1: l1 * w,
        scale: 0.5 * scale * w,
    })
}

/// Frequency-domain identity residual for `û(x)` at frequency `tau`.
///
/// The operator on the left is `τ²û + ∂x²û - (λ+N)Vû + iεWû`.
pub fn identity_residual_tau(
    uhat: &[Complex],
    x0: f64,
    h: f64,
    tau: f64,
    ms: &MultiplierSet,
    problem: &ModelProblem,
    mode: Mode,
) -> Result<IdentityResidual> {
    let nx = uhat.len();
    if nx < 9 {
        return Err(Error::Precondition("window too small for the residual stencils".into()));
    }
    let lambda = mode.angular_eigenvalue();
    let big_n = problem.params.big_n;
    let eps = problem.params.epsilon;
    let tau2 = tau * tau;
    let mut px = vec![0.0; nx];
    let mut rest = vec![0.0; nx];
    for i in 2..nx - 2 {
        let x = x0 + i as f64 * h;
        let m = ms.eval(x);
        let ew = eps * problem.w(x);
        let u = uhat[i];
        let ux = d1_at(uhat, i, h);
        let uxx = d2_at(uhat, i, h);
        let op = u * tau2 + uxx - u * problem.mode_coefficient(mode, x) + Complex::new(0.0, ew) * u;
        let t = point_terms(&m, x, lambda, big_n, ew, u, ux, tau2 * u.norm_sqr(), op);
        px[i] = t.px;
        rest[i] = t.lhs - t.bulk;
    }
    let (mut l1, mut scale) = (0.0, 0.0);
    for i in 4..nx - 4 {
        let dpx = d1_at(&px, i, h);
        l1 += (rest[i] - dpx).abs();
        scale += 0.5 * ((rest[i] + dpx).abs() + (rest[i] - dpx).abs());
    }
    Ok(IdentityResidual {
        l1: l1 * h,
        scale: scale * h,
    })
}

/// Residual of the multiplier identity on a recorded trajectory.
///
/// Classical multipliers use the time-domain identity on the recorded slab.
/// Refined multipliers need the window set: the field `χ₁χ_x ψ` is Fourier
/// transformed in time at the multiplier's `τ` and the frequency-domain
/// identity is evaluated over the recorded `x` window.
pub fn divergence_identity_residual(
    traj: &Trajectory,
    ms: &MultiplierSet,
    window: Option<&WindowSet>,
) -> Result<IdentityResidual> {
    match ms.kind {
        MultiplierKind::Classical { .. } => {
            let (u, v, slab) = trajectory_slab(traj);
            identity_residual_slab(&u, &v, &slab, ms, &traj.problem, traj.mode)
        }
        MultiplierKind::Refined { tau, .. } => {
            let window =
                window.ok_or_else(|| Error::Precondition("the frequency-domain identity needs a window set".into()))?;
            let uhat = crate::spectral::windowed_transform_at(traj, window, tau)?;
            identity_residual_tau(&uhat, traj.x0(), traj.spacing(), tau, ms, &traj.problem, traj.mode)
        }
    }
}

/// Flatten a trajectory into row-major `u`, `v` slabs.
pub fn trajectory_slab(traj: &Trajectory) -> (Vec<Complex>, Vec<Complex>, SlabGrid) {
    let nx = traj.window.len();
    let nt = traj.states.len();
    let mut u = Vec::with_capacity(nt * nx);
    let mut v = Vec::with_capacity(nt * nx);
    for s in &traj.states {
        u.extend_from_slice(&s.u);
        v.extend_from_slice(&s.v);
    }
    let slab = SlabGrid {
        t0: traj.t_start(),
        dt: traj.sample_dt(),
        nt,
        x0: traj.x0(),
        h: traj.spacing(),
        nx,
    };
    (u, v, slab)
}

/// `g(s) = (1 - 3s²)/(1 + s²)³ + M s²`.
pub fn lemma_function(m_const: f64, s: f64) -> f64 {
    let s2 = s * s;
    let d = 1.0 + s2;
    (1.0 - 3.0 * s2) / (d * d * d) + m_const * s2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaScan {
    pub min: f64,
    pub argmin: f64,
    pub n_samples: usize,
}

/// Minimum of [`lemma_function`] over `n_samples` uniform points of
/// `[0, s_max]`.
pub fn lemma_min_scan(m_const: f64, s_max: f64, n_samples: usize) -> Result<LemmaScan> {
    if !(s_max >= 2.0) {
        return Err(invalid("s_max", "must be >= 2"));
    }
    if n_samples < 100_000 {
        return Err(invalid("n_samples", "must be >= 1e5"));
    }
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n_samples {
        let s = s_max * i as f64 / (n_samples - 1) as f64;
        let g = lemma_function(m_const, s);
        if g < best.0 {
            best = (g, s);
        }
    }
    Ok(LemmaScan {
        min: best.0,
        argmin: best.1,
        n_samples,
    })
}

/// Whether `2 - 2α = 3α`.
pub fn alpha_balance(alpha: f64) -> bool {
    (2.0 - 2.0 * alpha - 3.0 * alpha).abs() <= 1e-12
}

/// `|τ|^{3α}(1 - 3|τ|^{2α}x²)/(1 + |τ|^{2α}x²)³ + M(τ² + 1)x²`, the weight
/// that has to dominate `C|τ|^{3α}` on the support of `χ_x`.
pub fn combined_weight(tau: f64, x: f64, alpha: f64, m_const: f64) -> f64 {
    let s = if tau == 0.0 { 0.0 } else { tau.abs().powf(alpha) };
    let y2 = s * s * x * x;
    let d = 1.0 + y2;
    s * s * s * (1.0 - 3.0 * y2) / (d * d * d) + m_const * (tau * tau + 1.0) * x * x
}
