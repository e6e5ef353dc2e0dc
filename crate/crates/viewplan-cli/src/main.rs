use clap::Parser;

fn main() {
    let cli = viewplan_cli::Cli::parse();
    if let Err(e) = viewplan_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
