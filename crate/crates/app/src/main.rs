use std::process::ExitCode;

use clap::Parser;
use memorability_app::cli::{Cli, Command};
use memorability_app::{commands, server};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let result = match &cli.command {
        Command::Schedule(a) => commands::schedule(a).map(drop),
        Command::Score(a) => commands::score(a).map(drop),
        Command::Extract(a) => commands::extract(a).map(drop),
        Command::Train(a) => commands::train(a).map(drop),
        Command::Evaluate(a) => commands::evaluate(a).map(drop),
        Command::Explain(a) => commands::explain(a).map(drop),
        Command::Augment(a) => commands::augment(a).map(drop),
        Command::Serve(a) => server::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(1)
        }
    }
}
