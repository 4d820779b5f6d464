use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ptree_learn_cli::config::OUT_ENV;
use ptree_learn_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    match execute(cli, env_out, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
