use clap::Parser;
use conebarrier::cli::{run, Cli, EXIT_ERROR};

fn main() {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("CONEBARRIER_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    std::process::exit(EXIT_ERROR);
                }
            }
            _ => {
                eprintln!("error: CONEBARRIER_THREADS must be a positive integer, got {v:?}");
                std::process::exit(EXIT_ERROR);
            }
        }
    }
    std::process::exit(run(cli));
}
