use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use livehost_cli::eval::{self, AblateOptions, GridConfig};
use livehost_cli::{write_rows, Format};
use livehost_core::evalkit::Level;
use livehost_core::{Catalogue, DialogueConfig, GenerationBackend};
use livehost_server::remote::RemoteBackend;

/// Evaluation tools: correctness, inter-annotator agreement, ablations.
#[derive(Parser)]
#[command(name = "evalkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Nominal,
    Interval,
}

#[derive(Subcommand)]
enum Command {
    /// Share of responses without claim violations. Without an input file
    /// the baseline stub run over the fixture comments is graded.
    Correctness {
        /// JSONL of {"response": {...}, "routing_id": 1007}.
        input: Option<PathBuf>,
        /// Print each violation to stderr.
        #[arg(long)]
        violations: bool,
    },
    /// Krippendorff's alpha of a rating matrix CSV (item column, then one
    /// column per annotator; empty cells are missing).
    Alpha {
        matrix: PathBuf,
        #[arg(long, value_enum, default_value = "nominal")]
        level: LevelArg,
    },
    /// Replay fixture comments through the session under each ablation
    /// variant.
    Ablate {
        /// TOML grid: `[[variant]]` tables of flags, optional `seed`,
        /// `spacing_ms` and `comments`. Standard four variants otherwise.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Generation endpoint; the catalogue stub otherwise.
        #[arg(long)]
        backend: Option<String>,
        /// Judge endpoint for creativity and engagement scores.
        #[arg(long)]
        judge: Option<String>,
        #[arg(long, default_value_t = 60_000)]
        timeout_ms: u64,
    },
}

fn remote(url: Option<String>, timeout: Duration) -> anyhow::Result<Option<Arc<dyn GenerationBackend>>> {
    Ok(match url {
        Some(u) => Some(Arc::new(RemoteBackend::new(u, timeout)?)),
        None => None,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut out = std::io::stdout();
    let catalogue = Arc::new(Catalogue::bundled());
    match cli.command {
        Command::Correctness { input, violations } => {
            let items = match input {
                Some(p) => eval::read_graded(&p)?,
                None => {
                    let opts = AblateOptions {
                        grid: GridConfig {
                            variant: vec![Default::default()],
                            ..Default::default()
                        },
                        catalogue: catalogue.clone(),
                        dialogue: DialogueConfig::bundled(),
                        backend: None,
                        judge: None,
                    };
                    eval::baseline_responses(opts)?
                }
            };
            let (row, found) = eval::correctness(&items, &catalogue)?;
            if violations {
                for v in &found {
                    eprintln!("line {}: {}", v.line, v.detail);
                }
            }
            write_rows(&mut out, &[row], cli.format)?;
        }
        Command::Alpha { matrix, level } => {
            let level = match level {
                LevelArg::Nominal => Level::Nominal,
                LevelArg::Interval => Level::Interval,
            };
            write_rows(&mut out, &[eval::alpha(&matrix, level)?], cli.format)?;
        }
        Command::Ablate { grid, backend, judge, timeout_ms } => {
            let timeout = Duration::from_millis(timeout_ms);
            let grid = match grid {
                Some(p) => GridConfig::load(&p)?,
                None => GridConfig::default(),
            };
            let rows = eval::ablate(AblateOptions {
                grid,
                catalogue,
                dialogue: DialogueConfig::bundled(),
                backend: remote(backend, timeout)?,
                judge: remote(judge, timeout)?,
            })?;
            write_rows(&mut out, &rows, cli.format)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

