//! Pseudo-spectral simulation and verification tools for incompressible
//! viscoelastic flow in the infinite-Weissenberg Oldroyd-B limit, written in
//! the strain variable `E = F - I`:
//!
//! ```text
//! u_t + u.grad u - mu lap u + grad p = div E + div(E E^T),   div u = 0
//! E_t + u.grad E = grad u + grad u E
//! ```

pub mod decay;
pub mod error;
pub mod initial_data;
pub mod invariants;
pub mod ode;
pub mod quadrature;
pub mod rng;
pub mod semigroup;
pub mod solver;
pub mod spectral;
pub mod weak_strong;

pub use error::{Error, Result};
pub use spectral::{Grid, Rank, SpectralField};
