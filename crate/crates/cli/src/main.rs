use clap::Parser;

fn main() {
    std::process::exit(qbayes_cli::run(qbayes_cli::Cli::parse()));
}
