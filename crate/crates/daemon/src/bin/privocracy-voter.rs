//! Runs one voter node in its own process.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use privocracy_daemon::config::DaemonConfig;
use privocracy_daemon::run_voter_process;

#[derive(Parser)]
#[command(name = "privocracy-voter", version, about = "Privocracy voter node")]
struct Args {
    #[arg(long, env = "PRIVOCRACY_CONFIG", default_value = "privocracy.toml")]
    config: PathBuf,
    /// This node's name in the config's voter list.
    #[arg(long)]
    voter: String,
    /// Overrides the address configured for this voter.
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let result = match DaemonConfig::load(&args.config) {
        Ok(cfg) => run_voter_process(cfg, &args.voter, args.listen, None).await,
        Err(e) => Err(e.into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("privocracy-voter: {e}");
            ExitCode::from(2)
        }
    }
}
