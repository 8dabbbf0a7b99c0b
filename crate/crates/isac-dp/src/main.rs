use clap::Parser;

fn main() {
    let cli = isac_dp::cli::Cli::parse();
    match isac_dp::cli::dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(isac_dp::cli::EXIT_INPUT_ERROR);
        }
    }
}
