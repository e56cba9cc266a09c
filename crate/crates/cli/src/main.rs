use std::process::ExitCode;

use clap::Parser;
use stockcaster_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = run(&cli, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
