use clap::Parser;

fn main() {
    let cli = gpett_harness::cli::Cli::parse();
    std::process::exit(gpett_harness::cli::execute(&cli));
}
