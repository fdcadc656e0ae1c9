use clap::Parser;

fn main() {
    let cli = bound_bridge::cli::Cli::parse();
    std::process::exit(bound_bridge::cli::run(cli));
}
