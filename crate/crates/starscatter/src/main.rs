use clap::Parser;
use starscatter::cli::{self, Cli};

fn main() {
    let args = Cli::parse();
    let code = match cli::run(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
