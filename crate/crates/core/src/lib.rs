//! Construction resource-flow simulation with reinforcement-learning,
//! rule-based and genetic-algorithm decision makers.

pub mod agents;
pub mod app;
pub mod checkpoint;
pub mod env;
pub mod episode;
pub mod error;
pub mod exogenous;
pub mod ga;
pub mod neural;
pub mod observe;
pub mod piecewise;
pub mod report;
pub mod reward;
pub mod rollout;
pub mod scenario;
pub mod trainer;

pub use error::{Error, Result};
