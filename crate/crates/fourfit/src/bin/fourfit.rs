use clap::Parser;

fn main() {
    let cli = fourfit::cli::Cli::parse();
    if let Err(e) = fourfit::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(fourfit::cli::exit_code(&e));
    }
}
