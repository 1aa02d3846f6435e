use clap::Parser;
use rigidity_lab_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = rigidity_lab_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
