pub mod backend;
pub mod centaur;
pub mod cma;
pub mod error;
pub mod format;
pub mod history;
pub mod mcts;
pub mod metrics;
pub mod probe;
pub mod proposer;
pub mod run;
pub mod seed;
pub mod tasks;

pub use error::{Error, Result};
