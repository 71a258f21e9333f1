pub mod cli;
pub mod envs;
pub mod error;
pub mod io;
pub mod model;
pub mod rewards;
pub mod trainer;
pub mod types;
pub use error::{Error, Result};
