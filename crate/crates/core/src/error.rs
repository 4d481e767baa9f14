use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    Dimension(usize),

    #[error("resolution {got} too small (need at least {min})")]
    Resolution { got: usize, min: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("potential support violates the boundary margin at node {node} (x = {position:?}, value = {value:e})")]
    SupportViolation {
        node: usize,
        position: Vec<f64>,
        value: f64,
    },

    #[error("derivative order {order} needs a zero margin of {needed} cells, potential has {available}")]
    DerivativeStencil {
        order: usize,
        needed: usize,
        available: usize,
    },

    #[error("cutoff radius {rho} exceeds the frequency lattice radius {p_max}")]
    CutoffBeyondLattice { rho: f64, p_max: f64 },

    #[error("operands live on different {what}")]
    Mismatch { what: &'static str },

    #[error("frequency {got:?} does not match the expected {expected:?}")]
    FrequencyMismatch { expected: String, got: String },

    #[error("point is not on the variety k·k = 0 (relative defect {defect:e})")]
    NotOnVariety { defect: f64 },

    #[error("variety rigidity: in d=2 a Θ-pair with k-l=p has |Im k| = |p|/2 = {forced}, requested {requested}")]
    VarietyRigidity { forced: f64, requested: f64 },

    #[error("|Im k| = {rho} beyond the resolvable bound {bound} for this grid")]
    Unresolvable { rho: f64, bound: f64 },

    #[error("Faddeev symbol has a near-zero on every tried lattice offset (min |symbol| = {min_abs:e})")]
    SymbolZero { min_abs: f64 },

    #[error("linear system is singular or near-singular ({context})")]
    Singular { context: String },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Dirichlet guard failed: smallest eigenvalue {eigenvalue:e} within threshold {threshold:e}")]
    GuardFailure { eigenvalue: f64, threshold: f64 },

    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
