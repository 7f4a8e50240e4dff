pub mod dgp;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod numerics;
pub mod oracles;
pub mod weights;

pub use error::{Error, Result};
