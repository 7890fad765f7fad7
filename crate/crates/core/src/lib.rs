//! Numerical laboratory for the wave equation with a trapping potential and a
//! small imaginary potential,
//!
//! ```text
//! (-∂t² + ∂x² + V(x)(Δ_S - N) + iεW(x)) ψ = 0   on ℝ_t × ℝ_x × S²,
//! ```
//!
//! reduced to independent spherical-harmonic modes. The crate evolves the
//! modes, evaluates the energy, Morawetz and windowed-Fourier functionals,
//! checks the associated identities and inequalities, and drives scenario
//! sweeps from TOML configuration files.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops read several arrays at offsets of the same index.
#![allow(clippy::needless_range_loop)]

pub mod convergence;
pub mod error;
pub mod estimates;
pub mod fd;
pub mod harness;
pub mod model;
pub mod multipliers;
pub mod solver;
pub mod spectral;

pub use convergence::{convergence_study, ConvergenceReport, OrderSeries};
pub use error::{Error, Result};
pub use estimates::{energy, noether_charge, EnergyReport, ModeSeries};
pub use harness::{run_scenario, ScenarioConfig, SummaryReport};
pub use model::{
    initial_data_gaussian, mode_equation_coefficient, potential_v, potential_w, Complex, GaussianData, GridSpec, Mode,
    ModeState, ModelParams, ModelProblem, Phase, PotentialProfile, ProfileShape, VelocityProfile,
};
pub use multipliers::{
    alpha_balance, classical_multiplier, lemma_min_scan, positivity_check, refined_multiplier, LemmaScan,
    MultiplierSet, WindowSet,
};
pub use solver::{evolve_mode, evolve_observed, Observer, Trajectory};
pub use spectral::{dft_time, j_functional, SpectralData};
