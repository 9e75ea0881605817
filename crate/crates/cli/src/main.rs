use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if let Err(e) = spdkit_cli::init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(spdkit_cli::EXIT_INPUT);
    }
    match spdkit_cli::run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(spdkit_cli::exit_code(&e))
        }
    }
}
