pub mod catalog;
pub mod codes;
pub mod error;
pub mod error_model;
pub mod fbl;
pub mod feedback;
pub mod op_phase;
pub mod optimizer;
pub mod params;
pub mod sim;

pub use error::{Error, Result};
