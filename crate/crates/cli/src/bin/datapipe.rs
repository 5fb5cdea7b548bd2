use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use livehost_cli::clean;
use livehost_core::datapipe::{distribution_report, read_jsonl};

/// Dataset cleaning for host dialogue instances.
#[derive(Parser)]
#[command(name = "datapipe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run dedup, PII, structure and coherence passes.
    Clean {
        input: PathBuf,
        output: PathBuf,
        /// Format of the report printed to stdout.
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
        /// Also write the JSON report here.
        #[arg(long)]
        report_file: Option<PathBuf>,
        /// Pass settings; bundled defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the intent histogram of a dataset.
    Distribution { input: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Clean { input, output, report, report_file, config } => {
            let config = clean::load_config(config.as_deref())?;
            let r = clean::run(&input, &output, &config)?;
            if let Some(path) = report_file {
                let mut w = livehost_cli::create(&path)?;
                serde_json::to_writer_pretty(&mut w, &r)?;
            }
            match report {
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&r)?),
                ReportFormat::Text => clean::write_text_report(&mut std::io::stdout(), &r)?,
            }
        }
        Command::Distribution { input } => {
            let data = read_jsonl(livehost_cli::open(&input)?)?;
            println!("{}", serde_json::to_string_pretty(&distribution_report(&data))?);
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
