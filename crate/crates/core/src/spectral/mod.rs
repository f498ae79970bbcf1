//! Periodic-box Fourier machinery: lattice, transforms, fields and
//! multipliers.

mod field;
mod grid;
pub mod ops;
pub mod snapshot;

pub use field::{Rank, SpectralField};
pub use grid::Grid;
pub use ops::{
    curl_rows, div, grad, hodge_decompose, lambda_power, laplacian, leray_project, physical_gradient, tensor_grad, transpose,
};
