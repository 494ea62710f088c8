use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use bccwalk_cli::{parse_config, run, Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, flags) = cli.command.split();
    let result = parse_config(command, flags).and_then(|config| run(&config));
    match result {
        Ok(report) => {
            match serde_json::to_string_pretty(&report.outputs) {
                // A closed pipe on stdout is not an error of the run.
                Ok(text) => {
                    let _ = writeln!(std::io::stdout().lock(), "{text}");
                }
                Err(e) => eprintln!("{}", CliError::Io(e.to_string())),
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for name in &report.failed_checks {
                eprintln!("failed: {name}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
