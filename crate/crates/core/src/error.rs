use thiserror::Error;

/// Errors shared across the geometry, flow, transport, fiber and loop modules.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("point ({x:.12}, {y:.12}) lies off the boundary circle (|rho| = {rho:.3e})")]
    OffBoundary { x: f64, y: f64, rho: f64 },

    #[error("state (x={x:.6}, y={y:.6}) lies outside the disk (rho = {rho:.3e})")]
    OutsideManifold { x: f64, y: f64, rho: f64 },

    #[error("glancing ray at (x={x:.6}, y={y:.6}, theta={theta:.6}): |<v,nu>| = {inner:.3e}")]
    GlancingRay { x: f64, y: f64, theta: f64, inner: f64 },

    #[error("time cap {cap} reached without boundary exit from (x={x:.6}, y={y:.6}, theta={theta:.6})")]
    CapReached { x: f64, y: f64, theta: f64, cap: f64 },

    #[error("orbit left the disk at t = {t:.6} (x={x:.6}, y={y:.6})")]
    LeftManifold { t: f64, x: f64, y: f64 },

    #[error("extension not strictly convex: margin {margin:.6e} at boundary angle beta = {beta:.6}")]
    ExtensionNotConvex { margin: f64, beta: f64, theta: f64 },

    #[error("extension trapped: probe (x={x:.6}, y={y:.6}, theta={theta:.6}) did not exit within {cap}")]
    ExtensionTrapped { x: f64, y: f64, theta: f64, cap: f64 },

    #[error("singular gauge at ({x:.6}, {y:.6}): |det u| = {det:.3e}")]
    SingularGauge { x: f64, y: f64, det: f64 },

    #[error("field does not vanish on the boundary: |p| = {norm:.3e} at ({x:.6}, {y:.6})")]
    BoundaryNonzero { x: f64, y: f64, norm: f64 },

    #[error("loop not positive definite: min eigenvalue {min_eig:.3e} at theta = {theta:.6}")]
    NotPositiveDefinite { min_eig: f64, theta: f64 },

    #[error("spectral factorization stalled after {iters} iterations (last update {update:.3e})")]
    NoConvergence { iters: usize, update: f64 },

    #[error("loop evaluation singular: |det| = {det:.3e} at theta = {theta:.6}")]
    SingularLoop { det: f64, theta: f64 },

    #[error("finite-difference step too large: relative change {change:.3e} under halving")]
    StepTooLarge { change: f64 },

    #[error("vertical degree violation: {0}")]
    DegreeViolation(String),

    #[error("aliasing suspected: top-quarter spectral energy fraction {fraction:.3e}")]
    AliasingSuspected { fraction: f64 },

    #[error("field is not real-valued: imaginary residual {residual:.3e} at ({x:.6}, {y:.6})")]
    NotReal { x: f64, y: f64, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
