//! Random forests of local experts (oblique trees whose split nodes are
//! linear SVMs over a block of features) and three model-transfer domain
//! adaptation methods that retarget a trained forest with a few labeled
//! target-domain samples.

pub mod adapt;
pub mod config;
pub mod data;
pub mod error;
pub mod forest;
pub mod optim;

pub use error::{Error, Result};
