use clap::Parser;
use privocracy_cli::{normalize_args, run, Cli};

fn main() {
    let cli = Cli::parse_from(normalize_args(std::env::args().collect()));
    std::process::exit(run(cli));
}
