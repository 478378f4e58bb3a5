use clap::Parser;

fn main() {
    let cli = topsig::cli::Cli::parse();
    if let Err(e) = topsig::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
