use clap::Parser;

fn main() -> std::process::ExitCode {
    smoothdist_cli::run(smoothdist_cli::Cli::parse())
}
