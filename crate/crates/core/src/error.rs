use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no impact before t = {t_max}")]
    NoImpact { t_max: f64 },

    #[error("chatter detected near t = {t}: consecutive impacts closer than {min_gap}")]
    Chatter { t: f64, min_gap: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("converged to a non-physical root: {}", diagnostics.join("; "))]
    SpuriousRoot {
        orbit: Box<crate::solver::SolvedOrbit>,
        diagnostics: Vec<String>,
    },

    #[error("grazing singularity: pre-impact velocity {velocity:e} at t = {t}")]
    GrazingSingularity { t: f64, velocity: f64 },

    #[error("window of {window} time units is too short for period multiples up to {k_max}")]
    InsufficientWindow { window: f64, k_max: usize },

    #[error("no pattern change found between d = {from} and d = {to}")]
    NotFound { from: f64, to: f64 },

    #[error("average undefined: no impacts inside the window")]
    EmptyWindow,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
