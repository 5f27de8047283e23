//! Simulation of multi-walker, multi-coin discrete quantum walks and the
//! teleportation protocols built on them.

pub mod error;
pub mod hilbert;
pub mod measure;
pub mod oracle;
pub mod protocol;
pub mod security;
pub mod suite;
pub mod walk;

pub use error::{Error, Result};
pub use hilbert::{
    fidelity, inner_product, partial_trace, tensor_product, BasisState, DensityMatrix, Slot, StateVector, SystemShape,
};
pub use num_complex::Complex64 as C64;
