//! Reference implementations for cross-checking the production code.
//!
//! Nothing here shares code with `rfda-core`: inputs are plain slices,
//! labels are `±1.0`, and every routine is the slow, obvious algorithm.
//! The solvers run accelerated projected gradient on the dual to a
//! certified duality gap.

pub mod solvers;
pub mod split;
