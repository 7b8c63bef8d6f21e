use clap::Parser;
use mipt_shadows::cli::{execute, exit_code, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
