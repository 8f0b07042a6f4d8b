//! Command-line front end for the Box Task lab: batch simulation, model
//! fitting, reports, scripted replays and the live session service.

pub mod commands;
pub mod service;
pub mod transport;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};

use commands::{CompareArgs, FitArgs, ReplayArgs, ReportArgs, SimulateArgs};
use service::{ObservabilityArg, ReliabilityArg, ServiceConfig, SessionService, SystemClock};

#[derive(Debug, Parser)]
#[command(name = "boxlab", version, about = "Rule induction in the Box Task")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run agents and write trajectories, run logs and a summary.
    Simulate(SimulateArgs),
    /// Fit SoC variants to trajectories by grid search.
    Fit(FitArgs),
    /// Print model comparison tables from fit files.
    Compare(CompareArgs),
    /// Write a markdown report.
    Report(ReportArgs),
    /// Replay a scripted LLM backend and print the run log.
    Replay(ReplayArgs),
    /// Serve live sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "BOXLAB_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Append-only event log, replayed on startup.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = service::DEFAULT_TIME_LIMIT_SECS)]
    pub time_limit: f64,
    #[arg(long, value_enum, default_value = "partial")]
    pub observability: ObservabilityArg,
    #[arg(long, value_enum, default_value = "children")]
    pub reliability: ReliabilityArg,
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    if !(args.time_limit > 0.0 && args.time_limit.is_finite()) {
        return Err(commands::UsageError(format!("--time-limit {} must be positive", args.time_limit)).into());
    }
    let config = ServiceConfig {
        observability: args.observability,
        reliability: args.reliability,
        time_limit_secs: args.time_limit,
        log_path: args.log.clone(),
    };
    let svc = Arc::new(SessionService::open(config, Arc::new(SystemClock))?);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse().context("parsing listen address")?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("serving {} restored sessions on http://{}", svc.session_count(), listener.local_addr()?);
        axum::serve(listener, service::router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server error")
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::cmd_simulate(&a),
        Command::Fit(a) => commands::cmd_fit(&a),
        Command::Compare(a) => commands::cmd_compare(&a),
        Command::Report(a) => commands::cmd_report(&a),
        Command::Replay(a) => commands::cmd_replay(&a),
        Command::Serve(a) => serve(&a),
    }
}
