use std::process::ExitCode;

use clap::Parser;
use sparsedom::{run, Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let jobs = cli.command.common().jobs;
    if jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Certification { witnesses, .. } = &e {
                for w in witnesses {
                    eprintln!("witness written to {}", w.display());
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
