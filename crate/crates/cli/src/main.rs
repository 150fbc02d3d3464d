use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use defi_rank_cli::api;
use defi_rank_cli::commands::{self, EvaluateArgs, IngestArgs, ReportArgs};
use defi_rank_cli::CliError;
use defi_rank_core::data::DataDir;
use defi_rank_core::store::ReportStore;

/// Multi-criteria ranking of DeFi lending protocols.
#[derive(Debug, Parser)]
#[command(name = "defi-rank", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate source files and write their canonical forms into the data directory.
    Ingest(IngestArgs),
    /// Score every sample date and write a run to the report store.
    Evaluate(EvaluateArgs),
    /// Print a stored score or rank series as CSV.
    Report(ReportArgs),
    /// Serve the JSON API over the report store.
    Serve {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
}

fn serve(data_dir: PathBuf, listen: SocketAddr) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::usage("IoError", format!("{listen}: {e}"));
    let runtime = tokio::runtime::Runtime::new().map_err(io_err)?;
    runtime.block_on(async {
        let store = ReportStore::new(DataDir::new(data_dir).runs_path());
        let listener = tokio::net::TcpListener::bind(listen).await.map_err(io_err)?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(io_err)?);
        axum::serve(listener, api::router(store))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(io_err)
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Ingest(args) => commands::ingest(&args, &mut out),
        Command::Evaluate(args) => commands::evaluate(&args, &mut out, &mut io::stderr()).map(|_| ()),
        Command::Report(args) => commands::report(&args, &mut out),
        Command::Serve { data_dir, listen } => serve(data_dir, listen),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e });
            let _ = writeln!(io::stderr(), "{body}");
            ExitCode::from(e.exit)
        }
    }
}
