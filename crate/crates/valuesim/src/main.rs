use clap::Parser;

use valuesim::cli::{self, Cli};
use valuesim::Error;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    // The gateway cache is write-through with atomic renames, so an
    // interrupt leaves nothing to flush; the handler only fixes the exit
    // code contract (1 on interruption).
    if let Err(e) = ctrlc::set_handler(|| {
        eprintln!("interrupted; cached work is already persisted");
        std::process::exit(1);
    }) {
        log::warn!("could not install the interrupt handler: {e}");
    }

    let cli = Cli::parse();
    if let Err(e) = cli::run(cli) {
        eprintln!("error: {e}");
        let code = match e {
            Error::Config(_) => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}
