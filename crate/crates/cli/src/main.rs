mod cli;
mod commands;
mod error;
mod input;

use std::fs;
use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;

use cli::{Cli, Command};
use commands::{combine_codes, Outcome, Payload, EXIT_USAGE};
use error::CliError;

fn run(cli: &Cli) -> Result<u8, CliError> {
    let args = cli.command.run_args();
    let spec = input::load_problem(&args.problem)?;
    let cfg = input::load_config(args)?;
    let method = args.method.into();

    let outcomes: Vec<Outcome> = if let Command::Validate(_) = cli.command {
        let cands = if args.x.is_empty() {
            Vec::new()
        } else {
            input::candidates(args, &spec, true)?
        };
        vec![commands::validate(&spec, &cands)?]
    } else {
        let require_y = matches!(cli.command, Command::Certify(_) | Command::Oracle(_));
        let cands = input::candidates(args, &spec, require_y)?;
        let one = |c: &lmcert_core::CandidatePoint| match &cli.command {
            Command::Certify(_) => commands::certify_one(&spec, c, &cfg),
            Command::ValueDerivs(_) => commands::value_derivs(&spec, c, &cfg, method),
            Command::SolveLower(_) => commands::solve_lower_cmd(&spec, c, &cfg, method),
            Command::Oracle(_) => commands::oracle(&spec, c, &cfg),
            Command::Subdiff(_) => commands::subdiff(&spec, c, &cfg, method),
            Command::Validate(_) => unreachable!("handled above"),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs as usize)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        pool.install(|| cands.par_iter().map(one).collect::<Result<Vec<_>, _>>())?
    };

    let many = outcomes.len() > 1;
    for (k, o) in outcomes.iter().enumerate() {
        if many {
            println!("== candidate {} ==", k + 1);
        }
        print!("{}", o.text);
    }
    if let Some(path) = &args.json {
        let mut text = if many {
            let all: Vec<&Payload> = outcomes.iter().map(|o| &o.json).collect();
            serde_json::to_string_pretty(&all)
        } else {
            serde_json::to_string_pretty(&outcomes[0].json)
        }
        .map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(combine_codes(outcomes.iter().map(|o| o.code)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
