use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bbo_core::probe::{run_probe, Anchor, Regime};
use bbo_core::tasks::{manifest_jsonl, task_by_id};
use bbo_harness::runner::{build_backend, write_atomic};
use bbo_harness::{emit_traces, read_records, run_experiment, write_tables, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bbo", about = "Black-box optimizer comparison harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every (task, method, seed) cell of a config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Aggregate a records file into table1.tsv and coverage_dynamics.tsv.
    Tables {
        records: PathBuf,
        /// Defaults to the directory holding the records.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export one TSV trace per 2D run.
    Traces {
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy-gradient probe: 10 uniform seed points, then 5 proposals.
    Probe {
        /// Backend settings are read from here; defaults to the mock.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "fn_sphere")]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = RegimeArg::Both)]
        regime: RegimeArg,
        #[arg(long, default_value = "probe")]
        out: PathBuf,
    },
    /// Dump the task manifest selected by a config.
    Catalog {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Writes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    BlackBox,
    BoPretend,
    Both,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, String> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn cmd_run(config: &Path, output_dir: Option<PathBuf>) -> Result<ExitCode, String> {
    let mut cfg = load_config(Some(config))?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let outcome = run_experiment(&cfg, None).map_err(|e| e.to_string())?;
    for r in outcome.records.iter().filter(|r| !r.is_ok()) {
        eprintln!(
            "cell {} failed: {}",
            r.key(),
            r.error.as_deref().unwrap_or("unknown")
        );
    }
    if let Err(e) = write_tables(&outcome.records, &cfg.output_dir) {
        eprintln!("tables not written: {e}");
    }
    let failed = outcome.failed();
    println!(
        "{} cells, {} failed, records in {}",
        outcome.records.len(),
        failed,
        outcome.records_path.display()
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_tables(records: &Path, out: Option<PathBuf>) -> Result<ExitCode, String> {
    let recs = read_records(records).map_err(|e| e.to_string())?;
    let dir = out.unwrap_or_else(|| parent_dir(records));
    write_tables(&recs, &dir).map_err(|e| e.to_string())?;
    println!("tables written to {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_traces(records: &Path, out: Option<PathBuf>) -> Result<ExitCode, String> {
    let recs = read_records(records).map_err(|e| e.to_string())?;
    let dir = out.unwrap_or_else(|| parent_dir(records));
    let report = emit_traces(&recs, &dir).map_err(|e| e.to_string())?;
    for s in &report.skipped {
        eprintln!("skipped {s}");
    }
    println!("{} trace files written", report.written.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_probe(
    config: Option<&Path>,
    task: &str,
    seed: u64,
    regime: RegimeArg,
    out: &Path,
) -> Result<ExitCode, String> {
    let cfg = load_config(config)?;
    let task = task_by_id(task, cfg.master_seed).map_err(|e| e.to_string())?;
    let backend = build_backend(&cfg).map_err(|e| e.to_string())?;
    let regimes = match regime {
        RegimeArg::BlackBox => vec![Regime::BlackBox],
        RegimeArg::BoPretend => vec![Regime::BoPretend],
        RegimeArg::Both => vec![Regime::BlackBox, Regime::BoPretend],
    };
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    for regime in regimes {
        let result = run_probe(&task, backend.as_ref(), &cfg.settings().request, regime, seed)
            .map_err(|e| e.to_string())?;
        let stem = format!("{}_{}_s{seed}", task.id, regime.label());
        let json = serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?;
        write_atomic(&out.join(format!("{stem}.json")), json.as_bytes()).map_err(|e| e.to_string())?;
        write_atomic(&out.join(format!("{stem}.tsv")), result.plot_tsv().as_bytes())
            .map_err(|e| e.to_string())?;
        println!(
            "{}: near_best {} near_last {} neither {} ({} evaluations)",
            regime.label(),
            result.count(Anchor::NearBest),
            result.count(Anchor::NearLast),
            result.count(Anchor::Neither),
            result.evaluations
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_catalog(config: Option<&Path>, out: Option<&Path>) -> Result<ExitCode, String> {
    let cfg = load_config(config)?;
    let tasks = cfg.tasks.resolve(cfg.master_seed).map_err(|e| e.to_string())?;
    let manifest = manifest_jsonl(&tasks);
    match out {
        Some(p) => write_atomic(p, manifest.as_bytes()).map_err(|e| e.to_string())?,
        None => print!("{manifest}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output_dir } => cmd_run(&config, output_dir),
        Command::Tables { records, out } => cmd_tables(&records, out),
        Command::Traces { records, out } => cmd_traces(&records, out),
        Command::Probe {
            config,
            task,
            seed,
            regime,
            out,
        } => cmd_probe(config.as_deref(), &task, seed, regime, &out),
        Command::Catalog { config, out } => cmd_catalog(config.as_deref(), out.as_deref()),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
