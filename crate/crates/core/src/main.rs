use clap::Parser;

fn main() {
    let cli = chancekit::cli::Cli::parse();
    std::process::exit(chancekit::cli::run(cli));
}
