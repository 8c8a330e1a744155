use std::process::ExitCode;

use clap::Parser;
use hiertune::cli::{error_line, run, CommandSpec};

fn main() -> ExitCode {
    let spec = match CommandSpec::try_parse() {
        Ok(spec) => spec,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("E:arg:{first}");
            return ExitCode::from(2);
        }
    };
    match run(&spec) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
