use clap::Parser;

fn main() {
    let cli = pan_cli::config::Cli::parse();
    if let Err(e) = pan_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
