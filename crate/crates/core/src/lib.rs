//! Generalized numbers, linear algebra and geometry over nets indexed by a
//! dyadic epsilon grid.

pub mod error;
pub mod jacobi;
pub mod linalg;
pub mod lorentz;
pub mod net;
pub mod par;
pub mod sharp;
pub mod wave;

pub use error::{Error, Result};
pub use net::{EpsilonGrid, GeneralizedNumber, NetClass, Thresholds};
