use clap::Parser;
use kfs_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => std::process::exit(outcome.exit_code()),
        Err(e) => {
            eprintln!("kfs: error: {e:#}");
            std::process::exit(1);
        }
    }
}
