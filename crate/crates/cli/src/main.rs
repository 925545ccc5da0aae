use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use uatm_cli::commands::{self, load_config, CliError, SolveArgs};
use uatm_cli::{exit, http};
use uatm_core::OperatorService;

#[derive(Parser)]
#[command(
    name = "uatm",
    version,
    about = "Vertiport closure reasoning for UAM traffic management"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArg {
    /// Network config; the bundled closure episode when omitted.
    #[arg(long, env = "UATM_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve logic programs. Exits 10 when satisfiable, 20 when not.
    Solve {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Number of answer sets to compute, 0 for all.
        #[arg(long, short = 'n', default_value_t = 1)]
        models: usize,
        #[arg(long)]
        json: bool,
        /// Show only the predicates shown by these files.
        #[arg(long = "project-shows", value_name = "FILE")]
        project_shows: Vec<PathBuf>,
    },
    /// Explain an atom of the first answer set: `uatm explain FILES... ATOM`.
    Explain {
        #[arg(required = true, num_args = 2.., value_name = "FILES... ATOM")]
        args: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario script and print its transcript as JSON lines.
    Scenario {
        #[command(flatten)]
        config: ConfigArg,
        /// Script file; the bundled episode when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Write the transcript here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay the bundled episode and compare each stage with the expected answer sets.
    Golden {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Print the logic program generated from a network config.
    Emit {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Serve the operator API.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Solve {
            files,
            models,
            json,
            project_shows,
        } => commands::solve(
            &SolveArgs {
                files: &files,
                models,
                json,
                project_shows: &project_shows,
            },
            &mut out,
        ),
        Command::Explain { mut args, json } => {
            let atom = args.pop().expect("clap requires two arguments");
            let files: Vec<PathBuf> = args.into_iter().map(PathBuf::from).collect();
            commands::explain_atom(&files, &atom, json, &mut out)
        }
        Command::Scenario {
            config,
            script,
            out: None,
        } => commands::scenario(config.config.as_deref(), script.as_deref(), &mut out),
        Command::Scenario {
            config,
            script,
            out: Some(path),
        } => {
            let mut buf = Vec::new();
            let code = commands::scenario(config.config.as_deref(), script.as_deref(), &mut buf)?;
            std::fs::write(&path, buf).map_err(|source| CliError::Io { path, source })?;
            Ok(code)
        }
        Command::Golden { config } => commands::golden(config.config.as_deref(), &mut out),
        Command::Emit { config } => commands::emit(config.config.as_deref(), &mut out),
        Command::Serve { config, port, bind } => {
            drop(out);
            serve(config.config, SocketAddr::new(bind, port))
        }
    }
}

fn serve(config: Option<PathBuf>, addr: SocketAddr) -> Result<i32, CliError> {
    let (network, agents) = load_config(config.as_deref())?;
    let service = OperatorService::with_session(network, agents).map_err(|e| CliError::Input(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, http::router(Arc::new(service)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("uatm: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
