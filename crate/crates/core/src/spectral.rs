//! Windowed time-Fourier analysis near the trap.
//!
//! With cutoffs `χ₁` (time), `χ₂` (the ramps of `χ₁`) and `χ_x` (space), the
//! fields `u₁ = χ₁χ_xψ`, `u₂ = χ₂χ_xψ`, `u₃ = χ₁ψ` satisfy
//!
//! ```text
//! L u₁ = F + G,   F = -2χ₁'∂t u₂ - χ₁''u₂,   G = 2χ_x'∂x u₃ + χ_x''u₃
//! ```
//!
//! exactly, because `χ₂ = 1` wherever `χ₁' ≠ 0`.
//!
//! Transform convention: `û(τ, x) = Δt Σₙ u(tₙ, x) e^{-iτtₙ}` on the recorded
//! samples, so that `Σ_k |û(τ_k)|² Δτ = 2π Σₙ |u(tₙ)|² Δt` over the full
//! padded frequency grid.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fd::{d1_at, d2_at};
use crate::model::{Complex, Mode, ModelProblem};
use crate::multipliers::{combined_weight, IdentityResidual, SlabGrid, WindowSet};
use crate::solver::Trajectory;

/// Default largest retained frequency.
pub const DEFAULT_TAU_MAX: f64 = 64.0;
/// Required ratio of the sampling rate to the Nyquist rate of `tau_max`.
pub const NYQUIST_MARGIN: f64 = 2.0;
/// Padded record length as a multiple of the recorded length.
pub const PAD_FACTOR: usize = 2;

/// Largest sampling interval that resolves `tau_max` with the required
/// margin: `dt ≤ π / (NYQUIST_MARGIN · tau_max)`.
pub fn max_sample_dt(tau_max: f64) -> f64 {
    std::f64::consts::PI / (NYQUIST_MARGIN * tau_max)
}

/// `u₁`, `u₂`, `u₃`, `F` and `G` on the recorded slab of one mode.
#[derive(Clone, Debug)]
pub struct WindowedFields {
    pub window: WindowSet,
    pub slab: SlabGrid,
    pub mode: Mode,
    pub problem: ModelProblem,
    pub u1: Vec<Complex>,
    pub u2: Vec<Complex>,
    pub u3: Vec<Complex>,
    pub f_src: Vec<Complex>,
    pub g_src: Vec<Complex>,
}

fn require_x_window(traj: &Trajectory) -> Result<()> {
    let h = traj.spacing();
    let xs = traj.xs();
    let margin = 4.0 * h;
    match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if a <= -2.0 - margin && b >= 2.0 + margin => Ok(()),
        _ => Err(Error::Precondition(
            "trajectory window must contain |x| <= 2 plus four nodes on each side".into(),
        )),
    }
}

/// Assemble the windowed fields for horizon `t_horizon` with the default ramp.
pub fn build_windowed_fields(traj: &Trajectory, t_horizon: f64) -> Result<WindowedFields> {
    build_windowed_fields_with(traj, &WindowSet::new(t_horizon)?)
}

pub fn build_windowed_fields_with(traj: &Trajectory, window: &WindowSet) -> Result<WindowedFields> {
    let t = window.t_horizon;
    traj.require_coverage(-2.0, t + 2.0)?;
    require_x_window(traj)?;
    let (psi, vel, slab) = crate::multipliers::trajectory_slab(traj);
    let nx = slab.nx;
    let h = slab.h;
    let chix: Vec<(f64, f64, f64)> = (0..nx).map(|i| window.chix.eval(slab.x(i))).collect();
    let zero = Complex::new(0.0, 0.0);
    let mut u1 = vec![zero; slab.len()];
    let mut u2 = vec![zero; slab.len()];
    let mut u3 = vec![zero; slab.len()];
    let mut f_src = vec![zero; slab.len()];
    let mut g_src = vec![zero; slab.len()];
    for n in 0..slab.nt {
        let tn = slab.t(n);
        let (c1, c1p, c1pp) = window.chi1.eval(tn);
        let (c2, c2p, _) = window.chi2.eval(tn);
        let row = n * nx;
        let p = &psi[row..row + nx];
        let v = &vel[row..row + nx];
        for i in 0..nx {
            let (cx, cxp, cxpp) = chix[i];
            let k = row + i;
            u1[k] = p[i] * (c1 * cx);
            u2[k] = p[i] * (c2 * cx);
            u3[k] = p[i] * c1;
            if c1p != 0.0 || c1pp != 0.0 {
                let dt_u2 = p[i] * (c2p * cx) + v[i] * (c2 * cx);
                f_src[k] = -dt_u2 * (2.0 * c1p) - u2[k] * c1pp;
            }
            if c1 != 0.0 && (cxp != 0.0 || cxpp != 0.0) && (2..nx - 2).contains(&i) {
                let dx_u3 = d1_at(p, i, h) * c1;
                g_src[k] = dx_u3 * (2.0 * cxp) + u3[k] * cxpp;
            }
        }
    }
    Ok(WindowedFields {
        window: window.clone(),
        slab,
        mode: traj.mode,
        problem: traj.problem,
        u1,
        u2,
        u3,
        f_src,
        g_src,
    })
}

fn slab_l2(slab: &SlabGrid, f: &[Complex]) -> f64 {
    (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * slab.dt * slab.h).sqrt()
}

impl WindowedFields {
    /// `L¹` norm of `L u₁ - F - G` over interior nodes, with both
    /// derivatives of `u₁` taken by finite differences.
    pub fn approx_divergence_residual(&self) -> IdentityResidual {
        let s = &self.slab;
        let (nt, nx) = (s.nt, s.nx);
        let eps = self.problem.params.epsilon;
        let coeff: Vec<Complex> = (0..nx)
            .map(|i| {
                let x = s.x(i);
                Complex::new(-self.problem.mode_coefficient(self.mode, x), eps * self.problem.w(x))
            })
            .collect();
        let inv_dt2 = 1.0 / (12.0 * s.dt * s.dt);
        let (mut l1, mut scale) = (0.0, 0.0);
        if nt < 5 || nx < 5 {
            return IdentityResidual { l1, scale };
        }
        for n in 2..nt - 2 {
            let at = |m: usize, i: usize| self.u1[m * nx + i];
            let row = &self.u1[n * nx..(n + 1) * nx];
            for i in 2..nx - 2 {
                let utt =
                    ((at(n + 1, i) + at(n - 1, i)) * 16.0 - (at(n + 2, i) + at(n - 2, i)) - at(n, i) * 30.0) * inv_dt2;
                let lu = -utt + d2_at(row, i, s.h) + coeff[i] * row[i];
                let src = self.f_src[n * nx + i] + self.g_src[n * nx + i];
                l1 += (lu - src).norm();
                scale += src.norm();
            }
        }
        let w = s.dt * s.h;
        IdentityResidual {
            l1: l1 * w,
            scale: scale * w,
        }
    }

    pub fn f_norm(&self) -> f64 {
        slab_l2(&self.slab, &self.f_src)
    }

    pub fn g_norm(&self) -> f64 {
        slab_l2(&self.slab, &self.g_src)
    }

    pub fn u1_norm_sq(&self) -> f64 {
        slab_l2(&self.slab, &self.u1).powi(2)
    }
}

/// `û₁` at one frequency over the trajectory window, by direct summation.
pub fn windowed_transform_at(traj: &Trajectory, window: &WindowSet, tau: f64) -> Result<Vec<Complex>> {
    traj.require_coverage(-2.0, window.t_horizon + 2.0)?;
    let xs = traj.xs();
    let chix: Vec<f64> = xs.iter().map(|&x| window.chix.value(x)).collect();
    let dt = traj.sample_dt();
    let mut out = vec![Complex::new(0.0, 0.0); xs.len()];
    for (s, &t) in traj.states.iter().zip(&traj.times) {
        let c1 = window.chi1.value(t);
        if c1 == 0.0 {
            continue;
        }
        let phase = Complex::from_polar(dt * c1, -tau * t);
        for ((o, &u), &cx) in out.iter_mut().zip(&s.u).zip(&chix) {
            *o += u * (phase * cx);
        }
    }
    Ok(out)
}

/// Record of the transform normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DftConvention {
    pub formula: String,
    pub sample_dt: f64,
    pub n_samples: usize,
    pub n_padded: usize,
    pub d_tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsevalCheck {
    /// `Σ |û₁|² Δτ Δx` over the retained band.
    pub spectral: f64,
    /// `2π Σ |u₁|² Δt Δx`.
    pub physical: f64,
    pub rel_error: f64,
}

/// Time transform of `u₁` on the band `|τ| ≤ tau_max`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub taus: Vec<f64>,
    pub d_tau: f64,
    pub x0: f64,
    pub h: f64,
    pub nx: usize,
    /// Row-major `(τ, x)`.
    pub u1_hat: Vec<Complex>,
    pub mode: Mode,
    /// `3α`, the exponent of the `J` weight.
    pub j_exponent: f64,
    pub convention: DftConvention,
    pub parseval: ParsevalCheck,
}

/// FFT of `u₁` along time for every `x`, zero padded by [`PAD_FACTOR`].
pub fn dft_time(wf: &WindowedFields, tau_max: f64) -> Result<SpectralData> {
    if !(tau_max > 0.0 && tau_max.is_finite()) {
        return Err(invalid("tau_max", "must be > 0"));
    }
    let s = &wf.slab;
    let limit = max_sample_dt(tau_max);
    if s.dt > limit * (1.0 + 1e-12) {
        return Err(Error::Nyquist {
            dt: s.dt,
            tau_max,
            limit,
        });
    }
    let n_pad = PAD_FACTOR * s.nt;
    let d_tau = 2.0 * std::f64::consts::PI / (n_pad as f64 * s.dt);
    let k_max = ((tau_max / d_tau) + 1e-9).floor() as i64;
    let k_max = k_max.min(n_pad as i64 / 2 - 1);
    let taus: Vec<f64> = (-k_max..=k_max).map(|k| k as f64 * d_tau).collect();
    let n_tau = taus.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_pad);
    let mut col = vec![Complex::new(0.0, 0.0); n_pad];
    let mut u1_hat = vec![Complex::new(0.0, 0.0); n_tau * s.nx];
    // e^{-iτ_k t₀} Δt for each retained k
    let shift: Vec<Complex> = taus.iter().map(|&t| Complex::from_polar(s.dt, -t * s.t0)).collect();
    for i in 0..s.nx {
        col.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        let mut any = false;
        for n in 0..s.nt {
            let z = wf.u1[n * s.nx + i];
            any |= z != Complex::new(0.0, 0.0);
            col[n] = z;
        }
        if !any {
            continue;
        }
        fft.process(&mut col);
        for (j, k) in (-k_max..=k_max).enumerate() {
            let idx = k.rem_euclid(n_pad as i64) as usize;
            u1_hat[j * s.nx + i] = col[idx] * shift[j];
        }
    }
    let spectral: f64 = u1_hat.iter().map(|z| z.norm_sqr()).sum::<f64>() * d_tau * s.h;
    let physical = 2.0 * std::f64::consts::PI * wf.u1_norm_sq();
    let rel_error = if physical > 0.0 {
        (spectral - physical).abs() / physical
    } else {
        spectral
    };
    Ok(SpectralData {
        taus,
        d_tau,
        x0: s.x0,
        h: s.h,
        nx: s.nx,
        u1_hat,
        mode: wf.mode,
        j_exponent: 3.0 * wf.problem.params.alpha,
        convention: DftConvention {
            formula: "u_hat(tau, x) = dt * sum_n u(t_n, x) exp(-i tau t_n)".into(),
            sample_dt: s.dt,
            n_samples: s.nt,
            n_padded: n_pad,
            d_tau,
        },
        parseval: ParsevalCheck {
            spectral,
            physical,
            rel_error,
        },
    })
}

impl SpectralData {
    /// `Σ |τ|^p |û₁|² Δτ Δx`; `p = 0` counts every frequency with weight 1.
    pub fn tau_moment(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (j, &tau) in self.taus.iter().enumerate() {
            let w = if p == 0.0 { 1.0 } else { tau.abs().powf(p) };
            if w == 0.0 {
                continue;
            }
            let row = &self.u1_hat[j * self.nx..(j + 1) * self.nx];
            acc += w * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        acc * self.d_tau * self.h
    }

    /// `Σ_x |û₁(τ_j, x)|² Δx` for every retained frequency.
    pub fn density(&self) -> Vec<f64> {
        (0..self.taus.len())
            .map(|j| {
                self.u1_hat[j * self.nx..(j + 1) * self.nx]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    * self.h
            })
            .collect()
    }
}

/// `J = Σ |τ|^{3α} |û₁|² Δτ Δx`.
pub fn j_functional(sd: &SpectralData) -> f64 {
    sd.tau_moment(sd.j_exponent)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedMorawetzReport {
    pub j: f64,
    /// `E(T) + E(0)`.
    pub energy_sum: f64,
    /// `J / (E(T) + E(0))`, undefined for zero energy.
    pub ratio: Option<f64>,
    /// `min weight / |τ|^{3α}` over the `(τ, x)` grid with `τ ≠ 0`, `|x| ≤ 2`.
    pub weight_min_ratio: f64,
    /// Lower bound the weight has to exceed.
    pub weight_floor: f64,
    pub weight_dominates: bool,
}

/// Compute `J` summed over modes and check that the combined weight
/// dominates `C|τ|^{3α}` on the support of `χ_x`, with `C` the minimum of
/// the lemma function.
pub fn refined_morawetz_check(
    sds: &[SpectralData],
    e0: f64,
    e_t: f64,
    alpha: f64,
    m_const: f64,
) -> Result<RefinedMorawetzReport> {
    let j: f64 = sds.iter().map(j_functional).sum();
    let energy_sum = e0 + e_t;
    let floor = crate::multipliers::lemma_min_scan(m_const, 10.0, 100_001)?.min;
    let mut worst = f64::INFINITY;
    if let Some(sd) = sds.first() {
        let xs: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * i as f64).collect();
        for &tau in sd.taus.iter().filter(|t| **t != 0.0) {
            let scale = tau.abs().powf(3.0 * alpha);
            for &x in &xs {
                worst = worst.min(combined_weight(tau, x, alpha, m_const) / scale);
            }
        }
    }
    Ok(RefinedMorawetzReport {
        j,
        energy_sum,
        ratio: (energy_sum > 0.0).then(|| j / energy_sum),
        weight_min_ratio: worst,
        weight_floor: floor,
        weight_dominates: worst >= floor * (1.0 - 1e-12),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosingReport {
    /// `K = Σ |τ| |û₁|² Δτ Δx`.
    pub k_moment: f64,
    /// `Σ |û₁|² Δτ Δx`.
    pub l2_hat: f64,
    pub j: f64,
    pub i_functional: f64,
    /// `K ≤ ‖û₁‖² + J`, from `|τ| ≤ 1 + |τ|^{6/5}`.
    pub interpolation_holds: bool,
    /// `K ≤ 2π I + J`.
    pub i_bound_holds: bool,
    pub energy_start: f64,
    pub energy_end: f64,
    /// `(E(T) - E(0)) / (ε (E(T) + E(0) + K))`.
    pub implied_ratio: Option<f64>,
    /// `E(T) / E(0)` from the solver.
    pub energy_ratio: Option<f64>,
}

/// Assemble the closing estimate from the spectral data, `I` and the
/// endpoint energies.
pub fn closing_estimate_check(sds: &[SpectralData], i_value: f64, e0: f64, e_t: f64, epsilon: f64) -> ClosingReport {
    let k: f64 = sds.iter().map(|s| s.tau_moment(1.0)).sum();
    let l2: f64 = sds.iter().map(|s| s.tau_moment(0.0)).sum();
    let j: f64 = sds.iter().map(j_functional).sum();
    let tol = 1e-12 * (l2 + j).max(f64::MIN_POSITIVE);
    let denom = epsilon * (e0 + e_t + k);
    ClosingReport {
        k_moment: k,
        l2_hat: l2,
        j,
        i_functional: i_value,
        interpolation_holds: k <= l2 + j + tol,
        i_bound_holds: k <= 2.0 * std::f64::consts::PI * i_value + j + tol,
        energy_start: e0,
        energy_end: e_t,
        implied_ratio: (denom > 0.0).then(|| (e_t - e0) / denom),
        energy_ratio: (e0 > 0.0).then(|| e_t / e0),
    }
}
