//! Parameter sweeps and the stability of empirical constants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::run::{run_scenario, write_outputs, MorawetzRow, SummaryReport, MORAWETZ_HEADER};

pub const SWEEP_SCHEMA: &str = "trapwave-sweep/1";

/// Largest relative change `|c_{k+1}/c_k - 1|` tolerated between
/// consecutive sweep points.
pub const STABILITY_TOL: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Time horizon `T`.
    #[serde(rename = "T")]
    Horizon,
    Epsilon,
    /// Grid spacing.
    Resolution,
    /// A single spherical-harmonic degree per point.
    Ell,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Horizon => "T",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Resolution => "resolution",
            SweepAxis::Ell => "ell",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Horizon => cfg.model.t_horizon = value,
            SweepAxis::Epsilon => cfg.model.epsilon = value,
            SweepAxis::Resolution => cfg.grid.spacing = value,
            SweepAxis::Ell => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::Config(format!("ell must be a nonnegative integer, got {value}")));
                }
                cfg.modes = vec![value as u32];
            }
        }
        cfg.id = format!("{}-{}", base.id, point_label(self, value));
        cfg.grid.half_length = None;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "t" | "t_horizon" => Ok(SweepAxis::Horizon),
            "epsilon" | "eps" => Ok(SweepAxis::Epsilon),
            "resolution" | "spacing" | "h" => Ok(SweepAxis::Resolution),
            "ell" | "l" => Ok(SweepAxis::Ell),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}` (expected T, epsilon, resolution or ell)"
            ))),
        }
    }
}

fn point_label(axis: SweepAxis, value: f64) -> String {
    format!("{}_{}", axis.name(), value)
}

/// `(max c, max_k max(c_{k+1}/c_k, c_k/c_{k+1}))` for the values of a
/// series of `(parameter, constant)` pairs in the given order.
pub fn fit_constant(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::Precondition("fit_constant needs at least 2 points".into()));
    }
    let c_hat = series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let stability = series
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].1, w[1].1);
            if a == b {
                1.0
            } else if a > 0.0 && b > 0.0 {
                (a / b).max(b / a)
            } else {
                f64::INFINITY
            }
        })
        .fold(1.0, f64::max);
    Ok((c_hat, stability))
}

/// Stability of one empirical constant along the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub name: String,
    /// `(axis value, constant)` for every point that produced it.
    pub history: Vec<(f64, f64)>,
    pub c_hat: f64,
    /// Largest consecutive ratio, at least 1.
    pub stability: f64,
    /// Largest `|c_{k+1}/c_k - 1|`.
    pub max_relative_change: f64,
    pub stable: bool,
    /// Observed orders `log(|c_k - c_{k+1}| / |c_{k+1} - c_{k+2}|) / log(h_k/h_{k+1})`
    /// on the resolution axis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observed_orders: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub output_dir: PathBuf,
    pub all_pass: Option<bool>,
    /// Names of failed checks.
    pub failed: Vec<String>,
    pub constants: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub base_id: String,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<ConstantFit>,
    /// Every point ran, passed its checks, and every fit is stable.
    pub all_pass: bool,
}

impl SweepReport {
    pub fn fit(&self, name: &str) -> Option<&ConstantFit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn observed_orders(history: &[(f64, f64)]) -> Vec<Option<f64>> {
    history
        .windows(3)
        .map(|w| {
            let d1 = (w[0].1 - w[1].1).abs();
            let d2 = (w[1].1 - w[2].1).abs();
            let r = w[0].0 / w[1].0;
            (d1 > 0.0 && d2 > 0.0 && r > 0.0 && r != 1.0).then(|| (d1 / d2).ln() / r.ln())
        })
        .collect()
}

fn fit_all(axis: SweepAxis, points: &[SweepPoint]) -> Vec<ConstantFit> {
    let names: BTreeSet<&String> = points.iter().flat_map(|p| p.constants.keys()).collect();
    let mut fits = Vec::new();
    for name in names {
        let history: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| p.constants.get(name).map(|c| (p.value, *c)))
            .collect();
        let Ok((c_hat, stability)) = fit_constant(&history) else {
            continue;
        };
        let max_rel = history
            .windows(2)
            .map(|w| {
                if w[0].1 != 0.0 {
                    (w[1].1 / w[0].1 - 1.0).abs()
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        fits.push(ConstantFit {
            name: name.clone(),
            c_hat,
            stability,
            max_relative_change: max_rel,
            stable: max_rel <= STABILITY_TOL,
            observed_orders: if axis == SweepAxis::Resolution {
                observed_orders(&history)
            } else {
                Vec::new()
            },
            history,
        });
    }
    fits
}

type PointResult = (SweepPoint, Option<MorawetzRow>);

/// Run `base` once per value of `axis`, in parallel over the available
/// cores, writing each point into `<output_dir>/<axis>_<value>`. Failed
/// points are recorded and do not stop the sweep.
pub fn sweep(base: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepReport> {
    if values.len() < 2 {
        return Err(Error::Precondition("a sweep needs at least 2 values".into()));
    }
    base.validate()?;
    let root = base.output_dir();
    std::fs::create_dir_all(&root)?;
    let slots: Vec<Mutex<Option<PointResult>>> = values.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(values.len());
    let run_point = |k: usize| -> PointResult {
        let value = values[k];
        let dir = root.join(point_label(axis, value));
        let mut point = SweepPoint {
            value,
            output_dir: dir.clone(),
            all_pass: None,
            failed: Vec::new(),
            constants: BTreeMap::new(),
            error: None,
        };
        let outcome = axis.apply(base, value).and_then(|mut cfg| {
            cfg.run.output_dir = Some(dir.clone());
            let out = run_scenario(&cfg)?;
            write_outputs(&out, &dir)?;
            Ok(out)
        });
        match outcome {
            Ok(out) => {
                let s: &SummaryReport = &out.summary;
                point.all_pass = Some(s.all_pass);
                point.failed = s.checks.iter().filter(|c| !c.verdict).map(|c| c.name.clone()).collect();
                point.constants = s.constants.clone();
                (point, out.morawetz)
            }
            Err(e) => {
                point.error = Some(e.to_string());
                (point, None)
            }
        }
    };
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= values.len() {
                    break;
                }
                let r = run_point(k);
                *slots[k].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    let (points, rows): (Vec<SweepPoint>, Vec<Option<MorawetzRow>>) = slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every sweep point runs")
        })
        .unzip();
    let fits = fit_all(axis, &points);
    let all_pass = points.iter().all(|p| p.all_pass == Some(true)) && fits.iter().all(|f| f.stable);
    let report = SweepReport {
        schema: SWEEP_SCHEMA.to_string(),
        base_id: base.id.clone(),
        axis,
        points,
        fits,
        all_pass,
    };
    std::fs::write(root.join("sweep.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    std::fs::write(root.join("sweep.csv"), sweep_csv(&report))?;
    let mut table = format!("{}\n", MORAWETZ_HEADER);
    for r in rows.iter().flatten() {
        table.push_str(&super::run::morawetz_csv_row(r));
        table.push('\n');
    }
    std::fs::write(root.join("morawetz.csv"), table)?;
    Ok(report)
}

/// `sweep.csv`: one row per point with every constant as a column.
pub fn sweep_csv(r: &SweepReport) -> String {
    let names: BTreeSet<&String> = r.points.iter().flat_map(|p| p.constants.keys()).collect();
    let mut out = format!("{},all_pass", r.axis.name());
    for n in &names {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for p in &r.points {
        let pass = match p.all_pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "error",
        };
        let _ = write!(out, "{},{pass}", p.value);
        for n in &names {
            let _ = write!(
                out,
                ",{}",
                p.constants.get(*n).map(|c| c.to_string()).unwrap_or_default()
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_constant_examples() {
        assert_eq!(fit_constant(&[(1.0, 5.0), (2.0, 5.0), (3.0, 5.0)]).unwrap(), (5.0, 1.0));
        assert_eq!(fit_constant(&[(1.0, 4.0), (2.0, 5.0)]).unwrap(), (5.0, 1.25));
        assert!(fit_constant(&[(1.0, 4.0)]).is_err());
        assert!(fit_constant(&[]).is_err());
        assert_eq!(fit_constant(&[(1.0, 0.0), (2.0, 1.0)]).unwrap().1, f64::INFINITY);
    }

    #[test]
    fn axis_parsing_and_labels() {
        assert_eq!("T".parse::<SweepAxis>().unwrap(), SweepAxis::Horizon);
        assert_eq!("resolution".parse::<SweepAxis>().unwrap(), SweepAxis::Resolution);
        assert!("tau".parse::<SweepAxis>().is_err());
        assert_eq!(point_label(SweepAxis::Horizon, 25.0), "T_25");
        assert_eq!(point_label(SweepAxis::Resolution, 0.125), "resolution_0.125");
    }

    #[test]
    fn orders_of_a_geometric_error() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let hist: Vec<(f64, f64)> = h.iter().map(|&h: &f64| (h, 3.0 + h.powi(4))).collect();
        for p in observed_orders(&hist) {
            assert!((p.unwrap() - 4.0).abs() < 1e-6);
        }
        let flat = vec![(0.4, 1.0), (0.2, 1.0), (0.1, 1.0)];
        assert_eq!(observed_orders(&flat), vec![None]);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let cfg = ScenarioConfig::from_toml_str("schema = \"trapwave-scenario/1\"\nid = \"x\"\nchecks = [\"lemma\"]\n")
            .unwrap();
        assert!(matches!(
            sweep(&cfg, SweepAxis::Horizon, &[]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            sweep(&cfg, SweepAxis::Horizon, &[10.0]),
            Err(Error::Precondition(_))
        ));
    }
}
