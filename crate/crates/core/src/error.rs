use thiserror::Error;

/// Errors raised by the solver, the diagnostics and the scenario harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("initial data support [{lo:.3}, {hi:.3}] leaves the admissible region [{min:.3}, {max:.3}]")]
    SupportViolation { lo: f64, hi: f64, min: f64, max: f64 },

    #[error("instability at t = {time:.4}: field norm {norm:.3e} exceeds {limit:.3e}")]
    Instability { time: f64, norm: f64, limit: f64 },

    #[error("causality violated at t = {time:.4}: boundary amplitude {amplitude:.3e}")]
    Causality { time: f64, amplitude: f64 },

    #[error("trajectory covers [{have_start:.3}, {have_end:.3}] but [{need_start:.3}, {need_end:.3}] is required")]
    Coverage {
        have_start: f64,
        have_end: f64,
        need_start: f64,
        need_end: f64,
    },

    #[error("sampling interval {dt:.4e} cannot resolve tau_max = {tau_max} (needs dt <= {limit:.4e})")]
    Nyquist { dt: f64, tau_max: f64, limit: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{0}")]
    Config(String),

    #[error("scenario `{id}`, mode l = {ell}: {source}")]
    Scenario {
        id: String,
        ell: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
