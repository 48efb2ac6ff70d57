//! Task suites, metrics, agents and experiment designs.

pub mod agents;
pub mod experiments;
pub mod fixtures;
pub mod metrics;
pub mod tasks;

pub use agents::*;
pub use experiments::*;
pub use fixtures::{fixture, Fixture, FIXTURES};
pub use metrics::*;
pub use tasks::*;
