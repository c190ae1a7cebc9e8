//! Per-run trace files for external plotting of 2D searches.

use std::path::{Path, PathBuf};

use bbo_core::Result;

use crate::runner::{write_atomic, RunRecord};

pub const TRACES_DIR: &str = "traces";

pub fn trace_file_name(record: &RunRecord) -> String {
    format!("{}__{}__s{}.tsv", record.task_id, record.method, record.seed)
}

/// Rows in query order. `None` for runs that are not 2D.
pub fn trace_tsv(record: &RunRecord) -> Option<String> {
    if record.trials.iter().any(|t| t.point.len() != 2) || record.family.dim() != 2 {
        return None;
    }
    let mut out = String::from("step\tx0\tx1\tloss\tclamped\tfallback\tinjected\n");
    for t in &record.trials {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            t.step,
            t.point[0],
            t.point[1],
            t.loss,
            u8::from(t.clamped),
            u8::from(t.fallback),
            u8::from(t.injected)
        ));
    }
    Some(out)
}

#[derive(Debug, Default)]
pub struct TraceReport {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

/// Writes one file per successful 2D record under `dir/traces`.
pub fn emit_traces(records: &[RunRecord], dir: &Path) -> Result<TraceReport> {
    let out_dir = dir.join(TRACES_DIR);
    std::fs::create_dir_all(&out_dir)?;
    let mut report = TraceReport::default();
    for r in records {
        if !r.is_ok() {
            report.skipped.push(format!("{}: cell failed", r.key()));
            continue;
        }
        match trace_tsv(r) {
            Some(tsv) => {
                let path = out_dir.join(trace_file_name(r));
                write_atomic(&path, tsv.as_bytes())?;
                report.written.push(path);
            }
            None => report.skipped.push(format!("{}: not a 2D task", r.key())),
        }
    }
    Ok(report)
}
