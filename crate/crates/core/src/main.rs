use clap::Parser;

fn main() {
    std::process::exit(qcontrol::cli::main_with(qcontrol::cli::Cli::parse()));
}
