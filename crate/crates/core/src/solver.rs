//! Method-of-lines solver for a single angular mode.
//!
//! Space is discretized with fourth-order centered differences on a uniform
//! grid with homogeneous Dirichlet data at `x = ±L`; time is advanced with the
//! truncated Taylor expansion of the exact propagator of the linear
//! semi-discrete system,
//!
//! ```text
//! y(t + dt) ≈ Σ_{j=0}^{8} (dt A)^j / j! · y(t),   A(u, v) = (v, D₂u - kVu + iεWu).
//! ```
//!
//! The expansion is stable on the imaginary axis up to `|λ dt| ≈ 3.39`; with
//! `dt ≤ h/2` the stiffest discrete mode sits at `|λ dt| ≈ 1.16`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::fd::STENCIL_REACH;
use crate::model::{Complex, GridSpec, Mode, ModeState, ModelProblem};

/// Order of the Taylor propagator.
pub const TAYLOR_ORDER: usize = 8;
/// Spatial accuracy order `p` of the scheme.
pub const SPATIAL_ORDER: u32 = 4;
/// Growth factor of the sup norm treated as blow-up.
pub const INSTABILITY_FACTOR: f64 = 1e6;
/// Amplitude allowed within [`BOUNDARY_BAND`] nodes of either boundary.
pub const CAUSALITY_TOL: f64 = 1e-12;
pub const BOUNDARY_BAND: usize = 5;

const CHECK_EVERY: usize = 16;

/// Receives the solution after every time step (and once for the initial
/// state with `step = 0`).
pub trait Observer {
    fn observe(&mut self, step: usize, grid: &GridSpec, state: &ModeState) -> Result<()>;
}

impl<T: Observer + ?Sized> Observer for &mut T {
    fn observe(&mut self, step: usize, grid: &GridSpec, state: &ModeState) -> Result<()> {
        (**self).observe(step, grid, state)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn observe(&mut self, step: usize, grid: &GridSpec, state: &ModeState) -> Result<()> {
        self.0.observe(step, grid, state)?;
        self.1.observe(step, grid, state)
    }
}

impl<A: Observer, B: Observer, C: Observer> Observer for (A, B, C) {
    fn observe(&mut self, step: usize, grid: &GridSpec, state: &ModeState) -> Result<()> {
        self.0.observe(step, grid, state)?;
        self.1.observe(step, grid, state)?;
        self.2.observe(step, grid, state)
    }
}

/// Observer that ignores everything.
pub struct NoRecord;

impl Observer for NoRecord {
    fn observe(&mut self, _: usize, _: &GridSpec, _: &ModeState) -> Result<()> {
        Ok(())
    }
}

/// Advances one mode by a fixed step.
pub struct Stepper {
    coeff: Vec<Complex>,
    inv_12h2: f64,
    tu: Vec<Complex>,
    tv: Vec<Complex>,
    nu: Vec<Complex>,
    nv: Vec<Complex>,
}

impl Stepper {
    pub fn new(problem: &ModelProblem, mode: Mode, grid: &GridSpec) -> Self {
        let n = grid.n_points;
        let eps = problem.params.epsilon;
        let coeff = (0..n)
            .map(|i| {
                let x = grid.x(i);
                Complex::new(-problem.mode_coefficient(mode, x), eps * problem.w(x))
            })
            .collect();
        let h = grid.spacing();
        let zero = vec![Complex::new(0.0, 0.0); n];
        Self {
            coeff,
            inv_12h2: 1.0 / (12.0 * h * h),
            tu: zero.clone(),
            tv: zero.clone(),
            nu: zero.clone(),
            nv: zero,
        }
    }

    /// Right-hand side of the semi-discrete system scaled by `s`.
    fn apply(
        coeff: &[Complex],
        inv_12h2: f64,
        u: &[Complex],
        v: &[Complex],
        du: &mut [Complex],
        dv: &mut [Complex],
        s: f64,
    ) {
        let n = u.len();
        let r = STENCIL_REACH;
        for i in 0..r {
            du[i] = Complex::new(0.0, 0.0);
            dv[i] = Complex::new(0.0, 0.0);
            du[n - 1 - i] = Complex::new(0.0, 0.0);
            dv[n - 1 - i] = Complex::new(0.0, 0.0);
        }
        let c2 = inv_12h2 * s;
        for i in r..n - r {
            du[i] = v[i] * s;
            let lap = (u[i + 1] + u[i - 1]) * 16.0 - (u[i + 2] + u[i - 2]) - u[i] * 30.0;
            dv[i] = lap * c2 + coeff[i] * u[i] * s;
        }
    }

    /// Advance `state` in place by `dt` (which may be negative).
    pub fn step(&mut self, state: &mut ModeState, dt: f64) {
        self.tu.copy_from_slice(&state.u);
        self.tv.copy_from_slice(&state.v);
        for j in 1..=TAYLOR_ORDER {
            let s = dt / j as f64;
            Self::apply(
                &self.coeff,
                self.inv_12h2,
                &self.tu,
                &self.tv,
                &mut self.nu,
                &mut self.nv,
                s,
            );
            for (a, b) in state.u.iter_mut().zip(&self.nu) {
                *a += b;
            }
            for (a, b) in state.v.iter_mut().zip(&self.nv) {
                *a += b;
            }
            std::mem::swap(&mut self.tu, &mut self.nu);
            std::mem::swap(&mut self.tv, &mut self.nv);
        }
        state.time += dt;
    }
}

/// Evolve `init` (defined at `init.time`) to `t_end`, handing every step to
/// `observer`. Returns the final state. `t_end < init.time` integrates
/// backwards.
pub fn evolve_observed<O: Observer + ?Sized>(
    problem: &ModelProblem,
    mode: Mode,
    grid: &GridSpec,
    init: &ModeState,
    t_end: f64,
    observer: &mut O,
) -> Result<ModeState> {
    if init.len() != grid.n_points || init.v.len() != grid.n_points {
        return Err(Error::Precondition(format!(
            "initial state has {} nodes, grid has {}",
            init.len(),
            grid.n_points
        )));
    }
    let t0 = init.time;
    let span = t_end - t0;
    let steps = (span.abs() / grid.dt).round() as usize;
    let dt = if span < 0.0 { -grid.dt } else { grid.dt };

    let scale = init.sup_norm();
    let limit = INSTABILITY_FACTOR * scale;
    let boundary_tol = CAUSALITY_TOL * scale.max(1.0);
    let check = |state: &ModeState| -> Result<()> {
        let b = state.boundary_amplitude(BOUNDARY_BAND);
        if b > boundary_tol {
            return Err(Error::Causality {
                time: state.time,
                amplitude: b,
            });
        }
        if scale > 0.0 {
            let norm = state.sup_norm();
            if !(norm <= limit) {
                return Err(Error::Instability {
                    time: state.time,
                    norm,
                    limit,
                });
            }
        }
        Ok(())
    };

    let mut state = init.clone();
    check(&state)?;
    observer.observe(0, grid, &state)?;
    let mut stepper = Stepper::new(problem, mode, grid);
    for n in 1..=steps {
        stepper.step(&mut state, dt);
        state.time = t0 + n as f64 * dt;
        if n % CHECK_EVERY == 0 || n == steps {
            check(&state)?;
        }
        observer.observe(n, grid, &state)?;
    }
    Ok(state)
}

/// Recorded history of one mode, optionally cropped to a spatial window and
/// a time interval.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub mode: Mode,
    pub problem: ModelProblem,
    pub times: Vec<f64>,
    /// States restricted to `window`.
    pub states: Vec<ModeState>,
    pub record_stride: usize,
    /// Grid index range that the stored states cover.
    pub window: Range<usize>,
    time_limit: Option<(f64, f64)>,
}

impl Trajectory {
    /// Empty recorder storing every `record_stride`-th step on the full grid.
    pub fn recorder(grid: GridSpec, mode: Mode, problem: ModelProblem, record_stride: usize) -> Self {
        Self {
            grid,
            mode,
            problem,
            times: Vec::new(),
            states: Vec::new(),
            record_stride: record_stride.max(1),
            window: 0..grid.n_points,
            time_limit: None,
        }
    }

    /// Restrict storage to nodes with `a ≤ x ≤ b`.
    pub fn with_x_window(mut self, a: f64, b: f64) -> Self {
        self.window = self.grid.index_range(a, b);
        self
    }

    /// Restrict storage to samples with `t0 ≤ t ≤ t1`.
    pub fn with_time_limit(mut self, t0: f64, t1: f64) -> Self {
        self.time_limit = Some((t0.min(t1), t0.max(t1)));
        self
    }

    pub fn is_full_window(&self) -> bool {
        self.window.start == 0 && self.window.end == self.grid.n_points
    }

    pub fn xs(&self) -> Vec<f64> {
        self.window.clone().map(|i| self.grid.x(i)).collect()
    }

    pub fn x0(&self) -> f64 {
        self.grid.x(self.window.start)
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    /// Spacing between recorded samples.
    pub fn sample_dt(&self) -> f64 {
        self.grid.dt * self.record_stride as f64
    }

    pub fn t_start(&self) -> f64 {
        self.times.first().copied().unwrap_or(f64::NAN)
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    /// Index of the recorded sample nearest to `t`, if within half a sample.
    pub fn sample_index(&self, t: f64) -> Option<usize> {
        if self.times.is_empty() {
            return None;
        }
        let dt = self.sample_dt();
        let k = ((t - self.t_start()) / dt).round();
        if k < 0.0 || k as usize >= self.times.len() {
            return None;
        }
        let k = k as usize;
        ((self.times[k] - t).abs() <= 0.5 * dt).then_some(k)
    }

    /// Fail unless the record spans `[a, b]`.
    pub fn require_coverage(&self, a: f64, b: f64) -> Result<()> {
        let tol = 0.5 * self.sample_dt();
        if self.times.is_empty() || self.t_start() > a + tol || self.t_end() < b - tol {
            return Err(Error::Coverage {
                have_start: self.t_start(),
                have_end: self.t_end(),
                need_start: a,
                need_end: b,
            });
        }
        Ok(())
    }

    /// Samples reversed so that time increases (backward runs record in
    /// decreasing order).
    pub fn into_increasing(mut self) -> Self {
        if self.times.len() > 1 && self.times[0] > self.times[1] {
            self.times.reverse();
            self.states.reverse();
        }
        self
    }

    /// Join a backward recording from `t₀` with a forward recording from the
    /// same `t₀` into one record with increasing time.
    pub fn join_backward(backward: Trajectory, forward: Trajectory) -> Result<Trajectory> {
        let mut backward = backward.into_increasing();
        let forward = forward.into_increasing();
        if backward.times.is_empty() {
            return Ok(forward);
        }
        let tol = 1e-9 * forward.sample_dt();
        match forward.times.first() {
            Some(&f0) if (backward.t_end() - f0).abs() <= tol => {}
            _ => return Err(Error::Precondition("trajectories do not meet at a common time".into())),
        }
        if backward.window != forward.window || backward.record_stride != forward.record_stride {
            return Err(Error::Precondition(
                "trajectories have different windows or strides".into(),
            ));
        }
        backward.times.pop();
        backward.states.pop();
        backward.times.extend(forward.times);
        backward.states.extend(forward.states);
        backward.time_limit = None;
        Ok(backward)
    }
}

impl Observer for Trajectory {
    fn observe(&mut self, step: usize, _grid: &GridSpec, state: &ModeState) -> Result<()> {
        if !step.is_multiple_of(self.record_stride) {
            return Ok(());
        }
        if let Some((a, b)) = self.time_limit {
            let tol = 1e-9 * self.grid.dt;
            if state.time < a - tol || state.time > b + tol {
                return Ok(());
            }
        }
        let w = self.window.clone();
        self.times.push(state.time);
        self.states.push(ModeState {
            u: state.u[w.clone()].to_vec(),
            v: state.v[w].to_vec(),
            time: state.time,
        });
        Ok(())
    }
}

/// Evolve and record every `record_stride`-th step on the full grid.
pub fn evolve_mode(
    problem: &ModelProblem,
    mode: Mode,
    grid: &GridSpec,
    init: &ModeState,
    t_end: f64,
    record_stride: usize,
) -> Result<Trajectory> {
    let mut traj = Trajectory::recorder(*grid, mode, *problem, record_stride);
    evolve_observed(problem, mode, grid, init, t_end, &mut traj)?;
    Ok(traj.into_increasing())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_data_gaussian, GaussianData, ModelParams, PotentialProfile};

    fn problem(eps: f64) -> ModelProblem {
        ModelProblem::new(
            ModelParams {
                epsilon: eps,
                ..Default::default()
            },
            PotentialProfile::default(),
        )
    }

    fn l2(a: &[Complex]) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = GridSpec::from_spacing(20.0, 0.1, 0.5).unwrap();
        let init = ModeState::zeros(grid.n_points, 0.0);
        let traj = evolve_mode(&problem(0.01), Mode::new(1), &grid, &init, 3.0, 4).unwrap();
        assert!(traj.states.iter().all(|s| s.sup_norm() == 0.0));
        assert_eq!(traj.times.len(), (3.0 / grid.dt) as usize / 4 + 1);
    }

    #[test]
    fn time_reversal_recovers_data() {
        let grid = GridSpec::from_spacing(30.0, 1.0 / 16.0, 0.5).unwrap();
        let p = problem(0.0);
        let init = initial_data_gaussian(&grid, &GaussianData::default(), 0.0).unwrap();
        let mode = Mode::new(0);
        let mut fwd = evolve_observed(&p, mode, &grid, &init, 10.0, &mut NoRecord).unwrap();
        fwd.v.iter_mut().for_each(|z| *z = -*z);
        fwd.time = 0.0;
        let back = evolve_observed(&p, mode, &grid, &fwd, 10.0, &mut NoRecord).unwrap();
        let diff: Vec<Complex> = back.u.iter().zip(&init.u).map(|(a, b)| a - b).collect();
        let rel = l2(&diff) / l2(&init.u);
        let h = grid.spacing();
        assert!(rel <= 10.0 * h.powi(SPATIAL_ORDER as i32), "rel = {rel:e}");
    }

    #[test]
    fn backward_run_records_increasing_times() {
        let grid = GridSpec::from_spacing(20.0, 0.125, 0.5).unwrap();
        let init = initial_data_gaussian(&grid, &GaussianData::default(), 0.0).unwrap();
        let traj = evolve_mode(&problem(0.01), Mode::new(0), &grid, &init, -2.0, 1).unwrap();
        assert_eq!(traj.t_start(), -2.0);
        assert_eq!(traj.t_end(), 0.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn real_and_imaginary_parts_decouple_without_epsilon() {
        let grid = GridSpec::from_spacing(20.0, 0.125, 0.5).unwrap();
        let init = initial_data_gaussian(&grid, &GaussianData::default(), 0.0).unwrap();
        let end = evolve_observed(&problem(0.0), Mode::new(2), &grid, &init, 4.0, &mut NoRecord).unwrap();
        assert!(end.u.iter().chain(&end.v).all(|z| z.im == 0.0));
        let end = evolve_observed(&problem(0.01), Mode::new(2), &grid, &init, 4.0, &mut NoRecord).unwrap();
        assert!(end.u.iter().any(|z| z.im != 0.0));
    }

    #[test]
    fn linearity() {
        let grid = GridSpec::from_spacing(25.0, 0.125, 0.5).unwrap();
        let p = problem(0.01);
        let mode = Mode::new(1);
        let a = initial_data_gaussian(&grid, &GaussianData::default(), 0.0).unwrap();
        let b = initial_data_gaussian(
            &grid,
            &GaussianData {
                center: 2.0,
                wavenumber: 3.0,
                ..Default::default()
            },
            0.0,
        )
        .unwrap();
        let (ca, cb) = (Complex::new(0.5, -1.0), Complex::new(2.0, 0.25));
        let mut sum = a.scaled(ca);
        for (s, z) in sum.u.iter_mut().zip(&b.u) {
            *s += z * cb;
        }
        let ea = evolve_observed(&p, mode, &grid, &a, 5.0, &mut NoRecord).unwrap();
        let eb = evolve_observed(&p, mode, &grid, &b, 5.0, &mut NoRecord).unwrap();
        let es = evolve_observed(&p, mode, &grid, &sum, 5.0, &mut NoRecord).unwrap();
        let err =
            es.u.iter()
                .zip(ea.u.iter().zip(&eb.u))
                .map(|(s, (x, y))| (s - (x * ca + y * cb)).norm())
                .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err:e}");
    }

    #[test]
    fn finite_propagation_speed() {
        let grid = GridSpec::from_spacing(40.0, 1.0 / 16.0, 0.5).unwrap();
        let data = GaussianData::default();
        let init = initial_data_gaussian(&grid, &data, 0.0).unwrap();
        let traj = evolve_mode(&problem(0.0), Mode::new(0), &grid, &init, 12.0, 32).unwrap();
        let r0 = data.support_radius();
        let h = grid.spacing();
        for s in &traj.states {
            let extent =
                s.u.iter()
                    .enumerate()
                    .filter(|(_, z)| z.norm() > 1e-12)
                    .map(|(i, _)| grid.x(i).abs())
                    .fold(0.0, f64::max);
            assert!(
                extent <= r0 + s.time * (1.0 + 4.0 * h) + 1.0,
                "t = {} extent = {extent}",
                s.time
            );
        }
    }

    #[test]
    fn causality_error_when_domain_too_small() {
        let grid = GridSpec::from_spacing(17.0, 0.125, 0.5).unwrap();
        let init = initial_data_gaussian(&grid, &GaussianData::default(), 0.0).unwrap();
        let err = evolve_observed(&problem(0.0), Mode::new(0), &grid, &init, 30.0, &mut NoRecord);
        assert!(matches!(err, Err(Error::Causality { .. })));
    }

    #[test]
    fn instability_detected_beyond_cfl() {
        let mut grid = GridSpec::from_spacing(20.0, 0.125, 0.5).unwrap();
        grid.dt = 0.5;
        let init = initial_data_gaussian(&grid, &GaussianData::default(), 0.0).unwrap();
        let err = evolve_observed(&problem(0.0), Mode::new(0), &grid, &init, 200.0, &mut NoRecord);
        assert!(matches!(
            err,
            Err(Error::Instability { .. }) | Err(Error::Causality { .. })
        ));
    }

    #[test]
    fn cropped_recorder() {
        let grid = GridSpec::from_spacing(20.0, 0.125, 0.5).unwrap();
        let init = initial_data_gaussian(&grid, &GaussianData::default(), 0.0).unwrap();
        let mut rec = Trajectory::recorder(grid, Mode::new(0), problem(0.0), 2)
            .with_x_window(-2.0, 2.0)
            .with_time_limit(1.0, 2.0);
        evolve_observed(&problem(0.0), Mode::new(0), &grid, &init, 3.0, &mut rec).unwrap();
        assert_eq!(rec.states[0].len(), 33);
        assert_eq!(rec.t_start(), 1.0);
        assert_eq!(rec.t_end(), 2.0);
        assert_eq!(rec.sample_index(1.5), Some(4));
        assert!(rec.require_coverage(1.0, 2.0).is_ok());
        assert!(rec.require_coverage(0.0, 2.0).is_err());
    }
}
