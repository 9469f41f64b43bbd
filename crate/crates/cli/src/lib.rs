//! Command-line front end: loads a JSON run config, applies flag overrides,
//! runs one subcommand and writes its files into the output directory.
//!
//! Exit codes: 0 on success, 1 on usage, config or I/O errors, 2 when a
//! checked inequality is flagged as violated.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use spikepdmp::io::{emit_config, execute, parse_config, Command, EventFormat, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spikepdmp", version, about = "Exact simulation of PDMP spiking networks and checks of their long-run behaviour")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Clone, Subcommand)]
enum Sub {
    /// One trajectory: events, summary and normalized config.
    Simulate(Flags),
    /// Replicated trajectories: per-checkpoint mean potential and spike-count histogram.
    Ensemble(Flags),
    /// Ensemble mean potential against its exponential decay bound.
    CheckTheorem2(Flags),
    /// Extinction fraction over nested horizons, with a soundness spot-check.
    CheckExtinction(Flags),
    /// Wasserstein distances between two ensembles without leak.
    CheckErgodicity(Flags),
    /// First-spike probability bounds.
    CheckBounds(Flags),
    /// Returns to the regeneration set and cascade pattern frequency.
    RegenDiagnostics(Flags),
    /// KS tests of the thinning sampler against the exact first-spike law.
    ValidateSampler(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, clap::Args)]
struct Flags {
    /// JSON run configuration (required)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's replica count.
    #[arg(long)]
    replicas: Option<usize>,
    /// Directory for output files; without it only the report is printed
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Event log format for `simulate`.
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Sub {
    fn split(self) -> (Command, Flags) {
        match self {
            Sub::Simulate(f) => (Command::Simulate, f),
            Sub::Ensemble(f) => (Command::Ensemble, f),
            Sub::CheckTheorem2(f) => (Command::CheckTheorem2, f),
            Sub::CheckExtinction(f) => (Command::CheckExtinction, f),
            Sub::CheckErgodicity(f) => (Command::CheckErgodicity, f),
            Sub::CheckBounds(f) => (Command::CheckBounds, f),
            Sub::RegenDiagnostics(f) => (Command::RegenDiagnostics, f),
            Sub::ValidateSampler(f) => (Command::ValidateSampler, f),
        }
    }
}

fn load_config(flags: &Flags) -> Result<RunConfig, String> {
    let path = flags.config.as_deref().ok_or("missing --config PATH")?;
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if flags.seed.is_some() || flags.replicas.is_some() {
        if let Some(seed) = flags.seed {
            cfg.seed = seed;
        }
        if let Some(replicas) = flags.replicas {
            cfg.replicas = Some(replicas);
        }
        // Re-validate so overrides obey the same rules as the file.
        cfg = parse_config(&emit_config(&cfg)).map_err(|e| format!("after overrides: {e}"))?;
    }
    Ok(cfg)
}

fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

/// Run the CLI on `argv` (including the program name).
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let (cmd, flags) = cli.command.split();
    let result = load_config(&flags).and_then(|cfg| {
        let format = match flags.format {
            Format::Jsonl => EventFormat::Jsonl,
            Format::Csv => EventFormat::Csv,
        };
        let out = execute(cmd, &cfg, format, flags.threads).map_err(|e| format!("{}: {e}", cmd.name()))?;
        if let Some(dir) = &flags.out {
            write_outputs(dir, &out.files)?;
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            let _ = write!(stdout, "{}", out.report);
            if out.violated {
                let _ = writeln!(stderr, "{}: bound flagged as violated", cmd.name());
                EXIT_VIOLATION
            } else {
                EXIT_OK
            }
        }
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_ERROR
        }
    }
}
