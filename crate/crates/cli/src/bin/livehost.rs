use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use livehost_cli::replay;
use livehost_core::session::CorpusShape;
use livehost_core::{load_catalogue, Catalogue, DialogueConfig, StubBackend};
use livehost_server::{gateway, media, remote, ServiceConfig};

/// Virtual live-commerce host services.
#[derive(Parser)]
#[command(name = "livehost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dialogue gateway.
    ServeDialogue(ServeArgs),
    /// Run the media service.
    ServeMedia(ServeArgs),
    /// Serve the catalogue stub backend over the generation wire schema.
    ServeStubBackend {
        #[arg(long, default_value = "127.0.0.1:8082")]
        listen: SocketAddr,
        #[arg(long)]
        catalogue: Option<PathBuf>,
    },
    /// Check a recorded event log and print its transcript.
    Replay {
        event_log: PathBuf,
        /// Catalogue the session ran on; bundled by default.
        #[arg(long)]
        catalogue: Option<PathBuf>,
        /// Print the subtitle/response transcript.
        #[arg(long)]
        transcript: bool,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

/// Flags override `LIVEHOST_*` variables, which override the config file.
#[derive(Args)]
struct ServeArgs {
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<SocketAddr>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    media: Option<String>,
    #[arg(long)]
    catalogue: Option<PathBuf>,
    #[arg(long)]
    dialogue_config: Option<PathBuf>,
    #[arg(long)]
    image_dir: Option<PathBuf>,
    #[arg(long)]
    event_log_dir: Option<PathBuf>,
    #[arg(long)]
    hold_period_ms: Option<i64>,
    #[arg(long)]
    speaking_rate: Option<f64>,
    #[arg(long)]
    queue_capacity: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ServeArgs {
    fn resolve(&self, media_service: bool) -> anyhow::Result<ServiceConfig> {
        let mut cfg = ServiceConfig::resolve(self.config.as_deref())?;
        if let Some(a) = self.listen {
            if media_service {
                cfg.media.listen = a;
            } else {
                cfg.gateway.listen = a;
            }
        }
        if self.backend.is_some() {
            cfg.backend.endpoint = self.backend.clone();
        }
        if self.media.is_some() {
            cfg.media.endpoint = self.media.clone();
        }
        if self.catalogue.is_some() {
            cfg.data.catalogue = self.catalogue.clone();
        }
        if self.dialogue_config.is_some() {
            cfg.data.dialogue = self.dialogue_config.clone();
        }
        if self.image_dir.is_some() {
            cfg.media.image_dir = self.image_dir.clone();
        }
        if self.event_log_dir.is_some() {
            cfg.gateway.event_log_dir = self.event_log_dir.clone();
        }
        if let Some(v) = self.hold_period_ms {
            cfg.session.hold_period_ms = v;
        }
        if let Some(v) = self.speaking_rate {
            cfg.session.speaking_rate = v;
        }
        if let Some(v) = self.queue_capacity {
            cfg.session.comment_queue_capacity = v;
        }
        if let Some(v) = self.seed {
            cfg.gateway.seed = v;
        }
        cfg.session.validate()?;
        Ok(cfg)
    }
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn load(path: Option<&PathBuf>) -> anyhow::Result<Catalogue> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(load_catalogue(&bytes)?)
        }
        None => Ok(Catalogue::bundled()),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::ServeDialogue(args) => {
            let cfg = args.resolve(false)?;
            // Blocking HTTP clients must be built outside the runtime.
            let gw = Arc::new(livehost_server::gateway_from_config(&cfg)?);
            let rt = runtime()?;
            rt.block_on(livehost_server::serve(cfg.gateway.listen, gateway::router(gw.clone())))?;
            gw.shutdown();
        }
        Command::ServeMedia(args) => {
            let cfg = args.resolve(true)?;
            let state = Arc::new(livehost_server::media_state_from_config(&cfg));
            runtime()?.block_on(livehost_server::serve(cfg.media.listen, media::router(state)))?;
        }
        Command::ServeStubBackend { listen, catalogue } => {
            let catalogue = Arc::new(load(catalogue.as_ref())?);
            let backend = StubBackend::new(catalogue)
                .with_stock_openings(DialogueConfig::bundled().rerank.stock_openings);
            runtime()?.block_on(livehost_server::serve(listen, remote::backend_router(Arc::new(backend))))?;
        }
        Command::Replay { event_log, catalogue, transcript, json } => {
            let catalogue = load(catalogue.as_ref())?;
            let events = replay::read_log(livehost_cli::open(&event_log)?)?;
            let report = replay::check(&events, &CorpusShape::of(&catalogue));
            if transcript {
                for line in replay::transcript(&events) {
                    println!("{line}");
                }
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!(
                    "{} events, {} narration segments, {} responses, {} dropped comments",
                    report.events, report.narration_segments, report.responses, report.dropped_comments
                );
                for (want, got) in &report.sequence_gaps {
                    println!("sequence gap: expected {want}, found {got}");
                }
                for v in &report.violations {
                    println!("violation: {v}");
                }
                println!("{}", if report.is_clean() { "log is clean" } else { "log has problems" });
            }
            if !report.is_clean() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    livehost_cli::init_tracing();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
