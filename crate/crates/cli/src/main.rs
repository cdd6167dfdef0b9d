use clap::Parser;
use tlpq_cli::{run, Cli};

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("tlpq: {e}");
        std::process::exit(e.exit_code());
    }
}
