use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use ideation_core::orchestrator::{
    log::read_log, provider_for, replay, EventConfig, LogPayload, Registry,
};
use ideation_core::sim::{run_scenario, Scenario};
use ideation_server::app::system_clock;
use ideation_server::{router, AppState};

#[derive(Parser)]
#[command(
    name = "engine",
    version,
    about = "Chat facilitation engine for asynchronous group ideation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve events over HTTP and WebSocket
    Serve {
        /// Event to create (or resume, if its log already exists)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        host: String,
        /// Directory holding one `<event_id>.jsonl` log per event
        #[arg(long, default_value = "logs")]
        log_dir: PathBuf,
        /// Seconds between checks for overdue phases
        #[arg(long, default_value_t = 30)]
        tick_secs: u64,
    },
    /// Verify a log by replaying it and print the final state
    Replay { log: PathBuf },
    /// Print the score report of a logged event
    Report { log: PathBuf },
    /// Run a simulation scenario
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace file, one JSON record per line; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV trace for plotting
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn load_replayed(
    path: &Path,
) -> Result<ideation_core::orchestrator::Replayed, Box<dyn std::error::Error>> {
    let entries = read_log(path)?;
    let Some(LogPayload::EventCreated { config }) = entries.first().map(|e| &e.payload) else {
        return Err(format!("{} does not start with EventCreated", path.display()).into());
    };
    let provider = provider_for(config)?;
    Ok(replay(&entries, provider)?)
}

fn replay_cmd(path: PathBuf) -> CliResult {
    let replayed = load_replayed(&path)?;
    let engine = &replayed.engine;
    eprintln!(
        "{}: {} entries, phase {:?}, {} missing entries re-derived",
        path.display(),
        engine.log().len() - replayed.repaired_tail.len(),
        engine.phase(),
        replayed.repaired_tail.len()
    );
    println!("{}", engine.snapshot_json());
    Ok(())
}

fn report_cmd(path: PathBuf) -> CliResult {
    let replayed = load_replayed(&path)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&replayed.engine.report())?
    );
    Ok(())
}

fn simulate_cmd(
    scenario: PathBuf,
    seed: u64,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> CliResult {
    let scenario = Scenario::load(&scenario)?;
    let output = run_scenario(&scenario, seed)?;
    let mut sink: Box<dyn Write> = match &out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    for line in output.json_lines() {
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    if let Some(path) = csv {
        let text = output
            .csv()
            .ok_or("CSV output is only available for bandit scenarios")?;
        std::fs::write(path, text)?;
    }
    Ok(())
}

async fn serve(
    config: Option<PathBuf>,
    host: String,
    port: u16,
    log_dir: PathBuf,
    tick_secs: u64,
) -> CliResult {
    let app = tokio::task::spawn_blocking(
        move || -> Result<AppState, ideation_core::orchestrator::EngineError> {
            AppState::new(Registry::open(&log_dir)?, system_clock())
        },
    )
    .await??;
    if let Some(path) = config {
        let config = EventConfig::load(&path)?;
        match app.registry().get(&config.event_id) {
            Ok(_) => tracing::info!(event = %config.event_id, "resumed from log"),
            Err(_) => {
                let id = config.event_id.clone();
                let state = app.clone();
                tokio::task::spawn_blocking(move || state.create_event(config)).await??;
                tracing::info!(event = %id, "created");
            }
        }
    }
    app.spawn_ticker(Duration::from_secs(tick_secs.max(1)));
    let addr: SocketAddr = format!("{host}:{port}").parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve {
            config,
            port,
            host,
            log_dir,
            tick_secs,
        } => tokio::runtime::Runtime::new()
            .map_err(Into::into)
            .and_then(|rt| rt.block_on(serve(config, host, port, log_dir, tick_secs))),
        Command::Replay { log } => replay_cmd(log),
        Command::Report { log } => report_cmd(log),
        Command::Simulate {
            scenario,
            seed,
            out,
            csv,
        } => simulate_cmd(scenario, seed, out, csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
