//! `canopy` — dependency tree resolution and advisory analysis.
//!
//! Exit codes: 0 success, 1 error, 2 partial ingest, 3 vulnerabilities
//! found.

mod commands;
mod opts;
mod output;

use clap::error::ErrorKind;
use clap::Parser;

use opts::Cli;

fn main() {
    // Die quietly when a pipe closes early (`canopy ... | head`), like
    // other Unix tools, instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => commands::EXIT_OK,
                _ => commands::EXIT_ERROR,
            };
        }
    };
    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::EXIT_ERROR
        }
    }
}
