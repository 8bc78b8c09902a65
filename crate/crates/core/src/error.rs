//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Real power of a negative base requested with a non-integer exponent.
    #[error("phi = {phi} is negative and k = {k} is not an integer; phi^k is undefined")]
    Domain { k: f64, phi: f64 },

    /// Sign-changing orbits exist only for odd integer exponents.
    #[error("sign-changing branch requires an odd integer k > 1, got k = {k}")]
    BranchUnavailable { k: f64 },

    /// Energy level at or beyond an endpoint of the admissible interval:
    /// the orbit collapses to the center or merges with the separatrix.
    #[error("degenerate orbit at B = {b}: energy level outside the open admissible range")]
    DegenerateOrbit { b: f64 },

    /// An iterative procedure exhausted its budget without meeting tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A finite-difference stencil leaves the admissible energy interval.
    #[error("step {h_step} at B = {b} leaves the admissible energy interval")]
    StepOutOfRange { b: f64, h_step: f64 },

    /// A computed quantity failed a mandatory accuracy check.
    #[error("tolerance failure: {0}")]
    TolFailure(String),

    /// Orbit too close to the center equilibrium for stable evaluation.
    #[error("orbit amplitude below the near-center threshold; quantity ill-conditioned")]
    NearCenter,

    /// An extrapolated eigenvalue falls inside the ambiguity band around zero.
    #[error("eigenvalue {lambda:e} lies in the ambiguous zero band; refine the grid")]
    AmbiguousZero { lambda: f64 },

    /// Right-hand side of a discrete solve has a kernel component above tolerance.
    #[error("right-hand side has kernel component {0:e}; not in the operator range")]
    NotInRange(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
