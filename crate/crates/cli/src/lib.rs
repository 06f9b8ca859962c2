//! `rashgam` command-line driver. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 1 on a
//! domain error, 2 on a usage error (bad flags, unreadable inputs).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl From<rashgam_core::Error> for Failure {
    fn from(e: rashgam_core::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::dispatch(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            2
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}
