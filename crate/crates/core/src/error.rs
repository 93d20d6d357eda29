//! Error types shared by all geometry modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("tangent set is rank deficient (rank {rank} < {needed})")]
    DegenerateTangent { rank: usize, needed: usize },

    #[error("point {at:?} outside chart domain")]
    Domain { at: Vec<f64> },

    #[error("finite-difference stencil at {at:?} needs margin {needed_margin} from the domain boundary")]
    FdStencil { at: Vec<f64>, needed_margin: f64 },

    #[error("induced metric not positive definite at {at:?} (smallest eigenvalue {min_eigenvalue:.3e})")]
    SpacelikeViolation { at: Vec<f64>, min_eigenvalue: f64 },

    #[error("dual map undefined: no normal completion with |<p,w>| above {tol:.3e}")]
    DualUndefined { tol: f64 },

    #[error("dual map degenerate at {at:?}: {reason}")]
    DualDegenerate { at: Vec<f64>, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("scalar curvature not identically zero: max |S| = {max_abs_s:.3e} exceeds gate {gate:.3e}")]
    SPrecond { max_abs_s: f64, gate: f64 },

    #[error("variation spec invalid: {0}")]
    Spec(String),

    #[error("volume function returned NaN at t = {t} (stencil left the spacelike regime; retry with smaller h)")]
    StencilRange { t: f64 },

    #[error("Newton inversion failed at t = {t}, x = {x:?} (residual {residual:.3e} after {iters} iterations)")]
    Inversion {
        t: f64,
        x: Vec<f64>,
        residual: f64,
        iters: usize,
    },
}
