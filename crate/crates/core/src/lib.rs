//! Numerical laboratory for the zero-energy Schrödinger inverse boundary
//! value problem: forward Dirichlet-to-Neumann maps, Faddeev solutions,
//! the boundary reduction to scattering amplitudes, Born-type
//! reconstruction and stability sweeps.

pub mod born;
pub mod error;
pub mod faddeev;
pub mod grid;
pub mod lab;
pub mod linalg;
pub mod forward;
pub mod potentials;
pub mod reduction;
pub mod selftest;

pub use error::{LabError, Result};
pub use grid::{build_square_domain, fourier_grid, Domain, DomainParams, FourierGrid};
pub use potentials::{sample_potential, Potential, PotentialSpec, Spectrum};
