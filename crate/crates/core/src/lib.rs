pub mod barriers;
pub mod bounds;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod sampling;
pub mod solver;
pub mod structure;
pub mod verify;

pub use error::{Error, Result};
