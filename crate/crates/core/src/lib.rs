//! Detection-loophole-free bounds for steering and Bell tests under
//! post-selection with arbitrary, possibly correlated, losses.

pub mod bell;
pub mod conic;
pub mod error;
pub mod extension;
pub mod hermitian;
pub mod multipartite;
pub mod scenario;
pub mod steering;
pub mod strategy;

pub use error::{Error, Result};
