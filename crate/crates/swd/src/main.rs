use clap::Parser;

fn main() {
    let cli = swd::cli::Cli::parse();
    if let Err(e) = swd::cli::run(cli) {
        eprintln!("swd: {e}");
        std::process::exit(e.exit_code());
    }
}
