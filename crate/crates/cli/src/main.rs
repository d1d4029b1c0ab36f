use clap::Parser;

fn main() {
    let cli = ringmod_cli::Cli::parse();
    if let Err(e) = ringmod_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
