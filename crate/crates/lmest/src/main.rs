use clap::Parser;

fn main() {
    let cli = lmest::cli::Cli::parse();
    if let Err(e) = lmest::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
