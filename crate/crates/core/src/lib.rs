//! Physics-informed 1-D convolutional networks for linear PDEs on the unit sphere.

// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod constructive;
pub mod error;
pub mod io;
pub mod jet;
pub mod network;
pub mod pinn;
pub mod problems;
pub mod rng;
pub mod sphere;
pub mod tape;
pub mod theory;
pub mod trainer;

pub use activation::Activation;
pub use error::{Error, Result};
pub use jet::Jet2;
pub use sphere::{SampleSet, ScalarField};
