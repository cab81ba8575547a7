//! Explicit-state CSL model checking for continuous-time Markov chains,
//! with a bundled reliability/availability/maintainability suite for
//! satellite systems.

pub mod csl;
pub mod cli;
pub mod ctmc;
pub mod error;
pub mod fmt;
pub mod lang;
pub mod numerics;
pub mod ram;
pub mod sim;

pub use ctmc::{build_state_space, build_state_space_with, BuildOptions, BuiltModel, Ctmc, RewardStructure, Transition};
pub use error::{Error, Result};
