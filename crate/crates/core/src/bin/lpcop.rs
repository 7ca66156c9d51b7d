use clap::Parser;

use lpcopula::cli::{exit_code, init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    init_threads();
    if let Err(err) = run(&cli) {
        eprintln!("lpcop: {err}");
        std::process::exit(exit_code(&err));
    }
}
