//! Multiple-model adaptive estimation for linear systems with bounded,
//! partially correlated parameter uncertainty.

pub mod canonical;
pub mod charpoly_bounds;
pub mod error;
pub mod linalg;
pub mod sim;
pub mod model;
pub mod transform;
pub mod tying;
pub mod vehicle;
pub mod weights;

pub use error::{Error, Result};
