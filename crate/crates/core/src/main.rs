use clap::Parser;

fn main() {
    let cli = cbss::cli::Cli::parse();
    if let Err(e) = cbss::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
