//! Numerical laboratory for the periodic solutions of
//! `-phi'' + phi - phi^k = 0`.
//!
//! The crate builds the two families of periodic orbits of the conservative
//! planar system phi' = xi, xi' = phi - phi^k, evaluates the period map
//! L(B) over energy levels by singular quadrature and by shooting, computes
//! the Floquet constant theta of the linearization together with the
//! monodromy matrix of the associated Hill equation, and resolves the low
//! spectrum of the periodic Hill operator -d^2/dx^2 + 1 - k phi^(k-1).
//!
//! The headline cross-check, exercised throughout the test suites, is the
//! identity dL/dB = -theta: the period map is strictly increasing on the
//! positive branch (theta < 0, one negative eigenvalue) and strictly
//! decreasing on the sign-changing branch (theta > 0, two negative
//! eigenvalues).

pub mod error;
pub mod floquet;
pub mod hill;
pub mod integrate;
pub mod lab;
pub mod model;
pub mod ode;
pub mod quadrature;

pub use error::{Error, Result};
pub use floquet::FloquetReport;
pub use hill::SpectrumReport;
pub use integrate::PeriodicOrbit;
pub use model::{Branch, Model, OrbitSpec};
pub use quadrature::QuadratureResult;
