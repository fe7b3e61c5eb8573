//! Exact Floquet-Bloch spectra of critical-contrast periodic quantum graphs
//! and their effective time-dispersive models.

pub mod effective_model;
pub mod error;
pub mod graph_model;
pub mod m_matrix;
pub mod numerics;
pub mod perturbation;
pub mod spectral_solver;
pub mod verify;

pub use error::{Error, Result};
