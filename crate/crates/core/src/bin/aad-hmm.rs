use clap::Parser;

fn main() {
    let cli = aad_hmm::cli::Cli::parse();
    if let Err(e) = aad_hmm::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
