//! Chiral Cosserat continuum: energy functional, symmetry checks, the planar
//! reduction to a chiral double sine-Gordon system, its perturbative kink
//! solutions, and a 1D method-of-lines solver.

pub mod dynamics;
pub mod error;
pub mod energetics;
pub mod field;
pub mod planar;
pub mod random;
pub mod soliton;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
