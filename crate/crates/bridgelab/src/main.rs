use clap::Parser;

fn main() {
    let cli = bridgelab::cli::Cli::parse();
    std::process::exit(bridgelab::cli::run(cli));
}
