use clap::Parser;

fn main() {
    let cli = stochkit_cli::Cli::parse();
    std::process::exit(stochkit_cli::run(&cli));
}
