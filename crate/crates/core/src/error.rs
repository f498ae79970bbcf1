use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: &'static str, found: &'static str },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step {dt} violates the CFL bound; use dt <= {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("numerical blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("profile is not integrable: tail estimate {tail:e} beyond r = {radius}")]
    NonIntegrable { radius: f64, tail: f64 },

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("infeasible recipe: {0}")]
    Infeasible(String),

    #[error("initial-data construction failed: {0}")]
    Construction(String),

    #[error("trajectory is not admissible: energy inequality violated at t = {t} (excess {excess:e})")]
    NotAdmissible { t: f64, excess: f64 },

    #[error("trajectories are misaligned: {0}")]
    Misaligned(String),

    #[error("malformed snapshot {path:?}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
