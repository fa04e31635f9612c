use clap::Parser;

fn main() {
    let cli = nplab::cli::Cli::parse();
    std::process::exit(nplab::cli::main_with(cli));
}
