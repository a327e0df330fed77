use clap::{CommandFactory, Parser};
use lnmpc_cli::cli::{execute, Cli, EXIT_ERROR};
use lnmpc_cli::ConfigError;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LNMPC_LOG_LEVEL", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprint!("{e}");
            eprintln!("\n{}", Cli::command().render_usage());
            std::process::exit(EXIT_ERROR);
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            std::process::exit(outcome.code);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            std::process::exit(EXIT_ERROR);
        }
    }
}
