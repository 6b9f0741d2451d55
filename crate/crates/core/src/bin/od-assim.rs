use std::process::ExitCode;

use clap::Parser;
use od_assim::cli::{main_with, Args};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    main_with(Args::parse())
}
