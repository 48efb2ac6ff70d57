//! Procedures-as-programs agents in a simulated household world.

pub mod baseline;
pub mod bench;
pub mod env;
pub mod learn;
pub mod library;
pub mod planner;
pub mod procir;
pub mod reactors;
pub mod world;
