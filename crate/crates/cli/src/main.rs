mod args;
mod commands;
mod error;
mod figures;
mod inputs;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use error::CliError;

const THREADS_ENV: &str = "ENDODEMAND_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Input(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot size the thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let mut ctx = Ctx {
        seed: cli.seed,
        samples: cli.samples,
        sources: Default::default(),
    };
    let text = match (&cli.command, cli.figure) {
        (Some(cmd), _) => match cmd {
            Command::Price(a) => commands::price(a, &mut ctx)?,
            Command::Roots(a) => commands::roots(a, &mut ctx)?,
            Command::Demand(a) => commands::demand(a, &mut ctx)?,
            Command::CrossImpact(a) => commands::cross_impact(a, &mut ctx)?,
            Command::Liquidity(a) => commands::liquidity(a, &mut ctx)?,
            Command::ClosedForm(a) => commands::closed_form(a, &mut ctx)?,
            Command::Equilibrium(a) => commands::equilibrium(a, &mut ctx)?,
            Command::RuinLimit(a) => commands::ruin_limit(a, &mut ctx)?,
        },
        (None, Some(fig)) => figures::run(fig, &mut ctx)?,
        (None, None) => {
            return Err(CliError::Input(
                "nothing to do: give a subcommand or --figure (see --help)".into(),
            ))
        }
    };
    output::emit(&text, cli.output.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
