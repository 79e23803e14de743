//! Cross-mode quantum battery simulation.
//!
//! A two-level battery embedded in a Λ-type qutrit is charged (or reset) by a
//! charger made of two harmonic oscillators. In the dispersive regime the
//! upper level is eliminated and the oscillators exchange one excitation
//! through the battery in 2×2 "doublet" blocks, which this crate evolves
//! analytically. The full Hamiltonian, thermal Lindblad dynamics and a
//! collisional multi-battery chain are provided alongside.

pub mod collisions;
pub mod effective;
pub mod error;
pub mod fulldyn;
pub mod hilbert;
pub mod lindblad;
pub mod observables;
pub mod states;

pub use error::{Error, Result};
pub use hilbert::{CMatrix, DensityMatrix, Level, ProductIndex, ProductSpace};
