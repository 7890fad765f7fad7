//! Scenario configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GaussianData, GridSpec, ModelParams, PotentialProfile};
use crate::multipliers::{QSign, DEFAULT_RAMP_ORDER};
use crate::spectral::DEFAULT_TAU_MAX;

/// Schema string every scenario file must declare.
pub const SCHEMA: &str = "trapwave-scenario/1";

/// Distance kept between the reachable region and the grid boundary.
pub const BOUNDARY_MARGIN: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub id: String,
    #[serde(default)]
    pub description: String,
    /// Spherical-harmonic degrees to simulate.
    #[serde(default)]
    pub modes: Vec<u32>,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub profile: PotentialProfile,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub multiplier: MultiplierConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub spacing: f64,
    pub cfl: f64,
    /// Half length of the domain; derived from the horizon and the data
    /// support when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            spacing: 1.0 / 32.0,
            cfl: 0.5,
            half_length: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataConfig {
    Gaussian(GaussianData),
    Zero,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Gaussian(GaussianData::default())
    }
}

impl DataConfig {
    /// Smallest interval containing the initial data.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DataConfig::Gaussian(g) => (g.center - g.support_radius(), g.center + g.support_radius()),
            DataConfig::Zero => (0.0, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub record_stride: usize,
    /// Defaults to `out/<id>` relative to the working directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            record_stride: 1,
            output_dir: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub enabled: bool,
    pub tau_max: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            tau_max: DEFAULT_TAU_MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplierConfig {
    pub refined_q_sign: QSign,
    pub ramp_order: u32,
    /// Frequencies at which the frequency-domain identity is checked.
    pub identity_taus: Vec<f64>,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        Self {
            refined_q_sign: QSign::default(),
            ramp_order: DEFAULT_RAMP_ORDER,
            identity_taus: vec![1.0, 4.0, 32.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Grid spacings, coarsest first; defaults to `8h, 4h, 2h, h`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacings: Option<Vec<f64>>,
}

/// Named checks a scenario can enable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    EnergyDrift,
    EnergyBalance,
    ExponentialBound,
    Noether,
    ClassicalMorawetz,
    RefinedMorawetz,
    IFunctional,
    GenEnergy,
    Positivity,
    IdentityClassical,
    IdentityRefined,
    ApproxDivergence,
    Parseval,
    RefinedWeight,
    Closing,
    SourceNorms,
    CutoffDomination,
    Lemma,
    AlphaBalance,
}

impl CheckKind {
    pub const ALL: [CheckKind; 19] = [
        CheckKind::EnergyDrift,
        CheckKind::EnergyBalance,
        CheckKind::ExponentialBound,
        CheckKind::Noether,
        CheckKind::ClassicalMorawetz,
        CheckKind::RefinedMorawetz,
        CheckKind::IFunctional,
        CheckKind::GenEnergy,
        CheckKind::Positivity,
        CheckKind::IdentityClassical,
        CheckKind::IdentityRefined,
        CheckKind::ApproxDivergence,
        CheckKind::Parseval,
        CheckKind::RefinedWeight,
        CheckKind::Closing,
        CheckKind::SourceNorms,
        CheckKind::CutoffDomination,
        CheckKind::Lemma,
        CheckKind::AlphaBalance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::EnergyDrift => "energy_drift",
            CheckKind::EnergyBalance => "energy_balance",
            CheckKind::ExponentialBound => "exponential_bound",
            CheckKind::Noether => "noether",
            CheckKind::ClassicalMorawetz => "classical_morawetz",
            CheckKind::RefinedMorawetz => "refined_morawetz",
            CheckKind::IFunctional => "i_functional",
            CheckKind::GenEnergy => "gen_energy",
            CheckKind::Positivity => "positivity",
            CheckKind::IdentityClassical => "identity_classical",
            CheckKind::IdentityRefined => "identity_refined",
            CheckKind::ApproxDivergence => "approx_divergence",
            CheckKind::Parseval => "parseval",
            CheckKind::RefinedWeight => "refined_weight",
            CheckKind::Closing => "closing",
            CheckKind::SourceNorms => "source_norms",
            CheckKind::CutoffDomination => "cutoff_domination",
            CheckKind::Lemma => "lemma",
            CheckKind::AlphaBalance => "alpha_balance",
        }
    }

    /// Checks that need the solution on `[-2, T+2]` near the trap.
    pub fn needs_history(self) -> bool {
        matches!(
            self,
            CheckKind::IFunctional
                | CheckKind::IdentityClassical
                | CheckKind::IdentityRefined
                | CheckKind::ApproxDivergence
                | CheckKind::Parseval
                | CheckKind::RefinedWeight
                | CheckKind::Closing
                | CheckKind::SourceNorms
        )
    }

    /// Checks that need the time-Fourier transform of the windowed field.
    pub fn needs_spectrum(self) -> bool {
        matches!(
            self,
            CheckKind::Parseval | CheckKind::RefinedWeight | CheckKind::Closing
        )
    }

    /// Checks that need at least one evolved mode.
    pub fn needs_evolution(self) -> bool {
        !matches!(
            self,
            CheckKind::Positivity | CheckKind::CutoffDomination | CheckKind::Lemma | CheckKind::AlphaBalance
        )
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema `{}` (expected `{SCHEMA}`)",
                self.schema
            )));
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::Config(
                "`id` must be a non-empty name without path separators".into(),
            ));
        }
        if self.checks.is_empty() {
            return Err(Error::Config("`checks` must list at least one check".into()));
        }
        self.model.validate()?;
        self.profile.validate()?;
        let evolves = self.checks.iter().any(|c| c.needs_evolution());
        if evolves && self.modes.is_empty() {
            return Err(Error::Config("`modes` must be non-empty for the enabled checks".into()));
        }
        let mut modes = self.modes.clone();
        modes.sort_unstable();
        modes.dedup();
        if modes.len() != self.modes.len() {
            return Err(Error::Config("`modes` contains duplicates".into()));
        }
        if !(self.grid.spacing > 0.0 && self.grid.spacing.is_finite()) {
            return Err(Error::Config("`grid.spacing` must be > 0".into()));
        }
        if !(self.grid.cfl > 0.0 && self.grid.cfl <= 1.0) {
            return Err(Error::Config("`grid.cfl` must lie in (0, 1]".into()));
        }
        if self.run.record_stride == 0 {
            return Err(Error::Config("`run.record_stride` must be >= 1".into()));
        }
        if self.checks.iter().any(|c| c.needs_spectrum()) && !self.spectral.enabled {
            return Err(Error::Config(
                "spectral checks are enabled but `spectral.enabled = false`".into(),
            ));
        }
        if !(self.spectral.tau_max > 0.0) {
            return Err(Error::Config("`spectral.tau_max` must be > 0".into()));
        }
        if self.multiplier.ramp_order < 1 {
            return Err(Error::Config("`multiplier.ramp_order` must be >= 1".into()));
        }
        if let Some(s) = &self.convergence.spacings {
            if s.len() < 3 {
                return Err(Error::Config("`convergence.spacings` needs at least 3 entries".into()));
            }
        }
        Ok(())
    }

    pub fn needs_history(&self) -> bool {
        self.checks.iter().any(|c| c.needs_history())
    }

    pub fn needs_spectrum(&self) -> bool {
        self.spectral.enabled && self.checks.iter().any(|c| c.needs_spectrum())
    }

    pub fn has(&self, check: CheckKind) -> bool {
        self.checks.contains(&check)
    }

    /// Last time the solution is needed.
    pub fn t_final(&self) -> f64 {
        if self.needs_history() {
            self.model.t_horizon + 2.0
        } else {
            self.model.t_horizon
        }
    }

    /// Half length that keeps every signal at least [`BOUNDARY_MARGIN`]
    /// away from the boundary over the run.
    pub fn required_half_length(&self) -> f64 {
        let (lo, hi) = self.data.support();
        let reach = self.t_final().max(2.0);
        lo.abs().max(hi.abs()) + reach + BOUNDARY_MARGIN
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        self.grid_spec_with_spacing(self.grid.spacing)
    }

    pub fn grid_spec_with_spacing(&self, spacing: f64) -> Result<GridSpec> {
        let need = self.required_half_length();
        let l = match self.grid.half_length {
            Some(l) if l < need => {
                return Err(Error::Config(format!(
                    "`grid.half_length` = {l} is below the causal minimum {need:.3}"
                )))
            }
            Some(l) => l,
            None => need,
        };
        GridSpec::from_spacing(l, spacing, self.grid.cfl)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.run
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.id))
    }

    /// Spacings used by the convergence study.
    pub fn convergence_spacings(&self) -> Vec<f64> {
        self.convergence.spacings.clone().unwrap_or_else(|| {
            let h = self.grid.spacing;
            vec![8.0 * h, 4.0 * h, 2.0 * h, h]
        })
    }
}
