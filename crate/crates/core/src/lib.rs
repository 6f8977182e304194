//! Complex quantum mechanics and its real-number reformulation.
//!
//! [`complexqm`] is the reference formalism. [`realmap`] carries states and
//! operators across to the real formalism, where a single real flag qubit per
//! subsystem plays the role of the imaginary unit, and [`realqm`] adds mixed
//! states, partial traces and Born probabilities on that side. [`bellswap`]
//! runs the entanglement-swapping Bell experiment through both.

pub mod bellswap;
pub mod complexqm;
pub mod error;
pub mod random;
pub mod realmap;
pub mod realqm;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{SystemShape, TOLERANCE};
