use clap::Parser;
use locmin_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(f) = locmin_cli::execute(cli) {
        eprintln!("error: {:#}", f.error());
        std::process::exit(f.exit_code());
    }
}
