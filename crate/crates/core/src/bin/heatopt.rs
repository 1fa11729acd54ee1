use clap::Parser;

fn main() {
    std::process::exit(heatopt::cli::run(heatopt::cli::Cli::parse()));
}
