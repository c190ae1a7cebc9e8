//! Experiment orchestration around `bbo-core`: configuration, the live
//! HTTP backend, cell scheduling, persistence and table emission.

pub mod config;
pub mod live;
pub mod runner;
pub mod tables;
pub mod traces;

use std::path::Path;

use bbo_core::Result;

pub use config::{BackendMode, RunConfig};
pub use runner::{read_records, run_experiment, RunOutcome, RunRecord};
pub use tables::{emit_tables, Tables};
pub use traces::emit_traces;

/// Writes both table files into `dir`.
pub fn write_tables(records: &[RunRecord], dir: &Path) -> Result<Tables> {
    let tables = emit_tables(records)?;
    std::fs::create_dir_all(dir)?;
    runner::write_atomic(&dir.join(tables::TABLE1_FILE), tables.table1.as_bytes())?;
    runner::write_atomic(
        &dir.join(tables::DYNAMICS_FILE),
        tables.coverage_dynamics.as_bytes(),
    )?;
    Ok(tables)
}
