mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::{CliError, Result};

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    let (out, output) = match &cli.command {
        Command::Center(a) => (&a.out, commands::center(a)?),
        Command::Score(a) => (&a.out, commands::score(a)?),
        Command::Correlate(a) => (&a.out, commands::correlate_cmd(a)?),
        Command::Sweep(a) => (&a.out, commands::sweep(a)?),
        Command::Contextuality(a) => (&a.out, commands::contextuality_cmd(a)?),
    };
    commands::write_output(out, &output)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", CliError::Usage(message.trim().to_string()).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
