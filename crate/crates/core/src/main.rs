use clap::Parser;

use cowu::cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("cowu: {err}");
        std::process::exit(exit_code(&err));
    }
}
