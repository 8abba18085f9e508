use clap::Parser;

fn main() {
    let cli = rvsm::cli::Cli::parse();
    std::process::exit(rvsm::cli::run(cli));
}
