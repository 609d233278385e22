pub mod datakit;
pub mod error;
pub mod fusion;
pub mod layers;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod trainer;

pub use error::{Error, Result};
