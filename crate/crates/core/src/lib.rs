//! Numerical study of radial ground states for the combined power-type
//! scalar field equation
//!
//! ```text
//! omega u - Delta u - eps |u|^{p-1} u - |u|^{4/(d-2)} u = 0   on R^d,
//! ```
//!
//! whose focusing tail carries the Sobolev-critical exponent. The crate
//! computes ground states by shooting, tracks their large-frequency
//! convergence to the Aubin-Talenti bubble, assembles the linearized
//! operators, and probes the spectral quantities that decide orbital
//! stability: kernel structure, negative directions, the unstable
//! eigenvalue of the Hamiltonian block system, and the mass/frequency
//! slope. A small resolvent laboratory measures low-energy scaling of
//! the free resolvent and the rank-one blowup of a Birman-Schwinger
//! inverse.

pub mod bubble;
pub mod error;
pub mod field;
pub mod fit;
pub mod grid;
pub mod linalg;
pub mod mass;
pub mod ode;
pub mod operator;
pub mod rescale;
pub mod resolvent;
pub mod shoot;
pub mod spectra;

pub use error::{CoreError, Result};
