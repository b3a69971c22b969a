//! Exact propagator of the repulsive delta-interacting Bose gas on the line.

pub mod bethe;
pub mod error;
pub mod evolution;
pub mod lattice;
pub mod propagator;
pub mod quadrature;
pub mod spectral;

pub use bethe::{permutations, Permutation, ScatteringContext};
pub use error::{Error, Result};
pub use propagator::{GreenOptions, GreenValue, PropagatorQuery};
pub use quadrature::{DampingBudget, QuadratureGrid};
