//! Grid-refinement studies of the solver and of the identity residuals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::energy_balance_check;
use crate::harness::config::{CheckKind, ScenarioConfig};
use crate::harness::run::{analyze_trap, evolve_one, relative};
use crate::model::{initial_data_gaussian, GridSpec, Mode, ModeState, ModelProblem};
use crate::multipliers::{Ramp, WindowSet};

pub const CONVERGENCE_SCHEMA: &str = "trapwave-convergence/1";

/// Formal order of the spatial stencils and of the residual stencils.
pub const SCHEME_ORDER: f64 = 4.0;

/// Smallest observed order accepted for the energy identity and the
/// multiplier identities.
pub const MIN_OBSERVED_ORDER: f64 = 2.8;

/// Error of one diagnostic across the resolutions, coarsest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSeries {
    pub name: String,
    /// Spacing attached to each error; for self-convergence the coarser of
    /// the two compared grids.
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log(e_k / e_{k+1}) / log(h_k / h_{k+1})`, undefined when either
    /// error vanishes.
    pub pair_orders: Vec<Option<f64>>,
    /// Least-squares slope of `log e` against `log h`; undefined when an
    /// error vanishes or fewer than two are available.
    pub order: Option<f64>,
    /// Errors strictly decrease under refinement.
    pub monotone: bool,
}

impl OrderSeries {
    pub fn new(name: impl Into<String>, spacings: Vec<f64>, errors: Vec<f64>) -> Self {
        let pair_orders = spacings
            .windows(2)
            .zip(errors.windows(2))
            .map(|(h, e)| (e[0] > 0.0 && e[1] > 0.0).then(|| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()))
            .collect();
        let order = least_squares_slope(&spacings, &errors);
        let monotone = errors.windows(2).all(|e| e[1] < e[0]);
        Self {
            name: name.into(),
            spacings,
            errors,
            pair_orders,
            order,
            monotone,
        }
    }

    /// `order ≥ min_order`; a series of exact zeros also passes.
    pub fn passes(&self, min_order: f64) -> bool {
        match self.order {
            Some(p) => p >= min_order,
            None => self.errors.iter().all(|e| *e == 0.0),
        }
    }
}

fn least_squares_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    if h.len() < 2 || e.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema: String,
    pub scenario_id: String,
    pub spacings: Vec<f64>,
    pub half_length: f64,
    pub series: Vec<OrderSeries>,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    pub fn series(&self, name: &str) -> Option<&OrderSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Every residual series reaches [`MIN_OBSERVED_ORDER`].
    pub fn all_pass(&self) -> bool {
        self.series
            .iter()
            .filter(|s| s.name != "solution")
            .all(|s| s.passes(MIN_OBSERVED_ORDER))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("diagnostic,spacing,error,pair_order\n");
        for s in &self.series {
            for (k, (h, e)) in s.spacings.iter().zip(&s.errors).enumerate() {
                let p = if k == 0 {
                    String::new()
                } else {
                    s.pair_orders[k - 1].map(|p| p.to_string()).unwrap_or_default()
                };
                let _ = writeln!(out, "{},{h},{e},{p}", s.name);
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!("convergence {} (L = {})\n", self.scenario_id, self.half_length);
        for s in &self.series {
            let order = s.order.map(|p| format!("{p:.3}")).unwrap_or_else(|| "undefined".into());
            let errs: Vec<String> = s.errors.iter().map(|e| format!("{e:.3e}")).collect();
            let _ = writeln!(out, "  {:<28} order {order:<9} errors [{}]", s.name, errs.join(", "));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        out
    }
}

/// Per-resolution diagnostics before they are arranged into series.
struct Level {
    spacing: f64,
    grid: GridSpec,
    finals: Vec<ModeState>,
    balance: f64,
    identity_classical: Option<f64>,
    identity_refined: Vec<(f64, f64)>,
    approx_divergence: Option<f64>,
}

/// Run `cfg` at each of its convergence spacings on a common domain and
/// report observed orders for the solution and the residual diagnostics.
pub fn convergence_study(cfg: &ScenarioConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let spacings = cfg.convergence_spacings();
    if spacings.len() < 3 {
        return Err(Error::Precondition(
            "a convergence study needs at least 3 resolutions".into(),
        ));
    }
    for w in spacings.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Precondition(
                "convergence spacings must be distinct and decreasing".into(),
            ));
        }
    }
    if cfg.modes.is_empty() {
        return Err(Error::Precondition(
            "a convergence study needs at least one mode".into(),
        ));
    }
    let coarse = cfg.grid_spec_with_spacing(spacings[0])?;
    let l = coarse.half_length;
    let problem = ModelProblem::new(cfg.model, cfg.profile);
    let t = cfg.model.t_horizon;
    let window = WindowSet::with_ramp(t, Ramp::smoothstep(cfg.multiplier.ramp_order))?;
    let mut warnings = Vec::new();

    let mut levels = Vec::new();
    for &h in &spacings {
        let grid = GridSpec::from_spacing(l, h, cfg.grid.cfl)?;
        let init = match &cfg.data {
            crate::harness::DataConfig::Gaussian(g) => initial_data_gaussian(&grid, g, 0.0)?,
            crate::harness::DataConfig::Zero => ModeState::zeros(grid.n_points, 0.0),
        };
        let mut level = Level {
            spacing: grid.spacing(),
            grid,
            finals: Vec::new(),
            balance: 0.0,
            identity_classical: None,
            identity_refined: Vec::new(),
            approx_divergence: None,
        };
        let mut series = Vec::new();
        for &ell in &cfg.modes {
            let mode = Mode::new(ell);
            let (s, traj, last) = evolve_one(cfg, &problem, &grid, mode, &init)?;
            if let Some(traj) = traj {
                let a = analyze_trap(cfg, &traj, &window)?;
                if let Some(r) = a.identity_classical {
                    let v = level.identity_classical.get_or_insert(0.0);
                    *v = v.max(relative(&r));
                }
                for (tau, r) in &a.identity_refined {
                    match level.identity_refined.iter_mut().find(|(t2, _)| t2 == tau) {
                        Some(slot) => slot.1 = slot.1.max(relative(r)),
                        None => level.identity_refined.push((*tau, relative(r))),
                    }
                }
                if let Some(r) = a.approx_divergence {
                    let v = level.approx_divergence.get_or_insert(0.0);
                    *v = v.max(relative(&r));
                }
            }
            level.finals.push(last);
            series.push(s);
        }
        level.balance = energy_balance_check(&series, 0.0, t)?.residual;
        levels.push(level);
    }

    let hs: Vec<f64> = levels.iter().map(|l| l.spacing).collect();
    let mut out = Vec::new();

    // self-convergence on the nodes of the coarser grid of each pair
    let mut diffs = Vec::new();
    for w in levels.windows(2) {
        let ratio = w[0].spacing / w[1].spacing;
        let r = ratio.round();
        if (ratio - r).abs() > 1e-9 || r < 1.0 {
            warnings.push(format!(
                "spacings {} and {} are not nested; solution self-convergence skipped",
                w[0].spacing, w[1].spacing
            ));
            diffs.clear();
            break;
        }
        let r = r as usize;
        let mut acc = 0.0;
        for (a, b) in w[0].finals.iter().zip(&w[1].finals) {
            for i in 0..w[0].grid.n_points {
                acc += (a.u[i] - b.u[i * r]).norm_sqr();
            }
        }
        diffs.push((acc * w[0].spacing).sqrt());
    }
    if !diffs.is_empty() {
        out.push(OrderSeries::new("solution", hs[..diffs.len()].to_vec(), diffs));
    }
    out.push(OrderSeries::new(
        "energy_balance",
        hs.clone(),
        levels.iter().map(|l| l.balance).collect(),
    ));
    if cfg.has(CheckKind::IdentityClassical) {
        out.push(OrderSeries::new(
            "identity_classical",
            hs.clone(),
            levels.iter().map(|l| l.identity_classical.unwrap_or(0.0)).collect(),
        ));
    }
    if cfg.has(CheckKind::IdentityRefined) {
        for &tau in &cfg.multiplier.identity_taus {
            let errs = levels
                .iter()
                .map(|l| {
                    l.identity_refined
                        .iter()
                        .find(|(t2, _)| *t2 == tau)
                        .map(|p| p.1)
                        .unwrap_or(0.0)
                })
                .collect();
            out.push(OrderSeries::new(
                format!("identity_refined_tau_{tau}"),
                hs.clone(),
                errs,
            ));
        }
    }
    if cfg.has(CheckKind::ApproxDivergence) {
        out.push(OrderSeries::new(
            "approx_divergence",
            hs.clone(),
            levels.iter().map(|l| l.approx_divergence.unwrap_or(0.0)).collect(),
        ));
    }
    for s in &out {
        if !s.monotone && s.errors.iter().any(|e| *e > 0.0) {
            warnings.push(format!("{}: errors do not decrease monotonically", s.name));
        }
    }
    Ok(ConvergenceReport {
        schema: CONVERGENCE_SCHEMA.to_string(),
        scenario_id: cfg.id.clone(),
        spacings: hs,
        half_length: l,
        series: out,
        warnings,
    })
}

/// Run [`convergence_study`] and write `convergence.json` and
/// `convergence.csv` into the configured output directory.
pub fn converge_and_write(cfg: &ScenarioConfig) -> Result<ConvergenceReport> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let r = convergence_study(cfg)?;
    std::fs::write(dir.join("convergence.json"), serde_json::to_string_pretty(&r)? + "\n")?;
    std::fs::write(dir.join("convergence.csv"), r.to_csv())?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h = vec![0.4, 0.2, 0.1];
        let e: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powi(4)).collect();
        let s = OrderSeries::new("x", h, e);
        assert!((s.order.unwrap() - 4.0).abs() < 1e-12);
        for p in &s.pair_orders {
            assert!((p.unwrap() - 4.0).abs() < 1e-12);
        }
        assert!(s.monotone && s.passes(MIN_OBSERVED_ORDER));
    }

    #[test]
    fn zero_errors_have_no_order() {
        let s = OrderSeries::new("x", vec![0.4, 0.2, 0.1], vec![0.0; 3]);
        assert_eq!(s.order, None);
        assert!(s.pair_orders.iter().all(|p| p.is_none()));
        assert!(s.passes(MIN_OBSERVED_ORDER));
        let bad = OrderSeries::new("x", vec![0.4, 0.2, 0.1], vec![1e-3, 2e-3, 1e-4]);
        assert!(!bad.monotone);
    }

    #[test]
    fn rejects_degenerate_spacings() {
        let base = "schema = \"trapwave-scenario/1\"\nid = \"c\"\nmodes = [0]\nchecks = [\"energy_balance\"]\n[model]\nt_horizon = 5.0\n";
        let two = format!("{base}[convergence]\nspacings = [0.5, 0.25]\n");
        assert!(ScenarioConfig::from_toml_str(&two).is_err());
        let same = format!("{base}[convergence]\nspacings = [0.5, 0.25, 0.25]\n");
        let cfg = ScenarioConfig::from_toml_str(&same).unwrap();
        assert!(matches!(convergence_study(&cfg), Err(Error::Precondition(_))));
    }
}
