//! Runs the coordination daemon.
//!
//! Listen address and data directory come from flags or from
//! `PRIVOCRACY_ADDR` and `PRIVOCRACY_DATA_DIR`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use privocracy_daemon::config::DaemonConfig;
use privocracy_daemon::{start, DaemonOptions};

#[derive(Parser)]
#[command(name = "privocracy-daemon", version, about = "Privocracy coordination daemon")]
struct Args {
    #[arg(long, env = "PRIVOCRACY_CONFIG", default_value = "privocracy.toml")]
    config: PathBuf,
    /// HTTP listen address.
    #[arg(long, env = "PRIVOCRACY_ADDR", default_value = "127.0.0.1:7800")]
    listen: String,
    /// Directory holding the command log.
    #[arg(long, env = "PRIVOCRACY_DATA_DIR", default_value = "privocracy-data")]
    data_dir: PathBuf,
    /// Fixes all randomness; for reproducible test runs only.
    #[arg(long, hide = true)]
    seed: Option<u64>,
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
    let config = match DaemonConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("privocracy-daemon: {e}");
            return ExitCode::from(2);
        }
    };
    let mut opts = DaemonOptions::new(config);
    opts.data_dir = Some(args.data_dir);
    opts.listen = args.listen;
    opts.seed = args.seed;
    let running = match start(opts).await {
        Ok(r) => r,
        Err(e) => {
            eprintln!("privocracy-daemon: {e}");
            return ExitCode::from(2);
        }
    };
    // Scripts and tests read the bound address from here.
    println!("listening on {}", running.http_addr);
    match running.server.await {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("privocracy-daemon: {e}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("privocracy-daemon: {e}");
            ExitCode::FAILURE
        }
    }
}
