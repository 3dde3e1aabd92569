mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use kerr_core::KerrError;

use crate::args::{Cli, Command};

const USAGE: u8 = 1;
const NUMERICAL: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<KerrError>()) {
        Some(
            KerrError::Numerical(_)
            | KerrError::Diverged { .. }
            | KerrError::Truncation(_)
            | KerrError::CutoffExceeded { .. },
        ) => NUMERICAL,
        _ => USAGE,
    }
}

/// The error chain, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !parts.last().is_some_and(|prev| prev.ends_with(&msg)) {
            parts.push(msg);
        }
    }
    parts.join(": ")
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::SampleDisplacements(a) => commands::sample_displacements_cmd(a),
        Command::Label(a) => commands::label(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Wigner(a) => commands::wigner(a),
        Command::Sequential(a) => commands::sequential(a),
        Command::Kernel(a) => commands::kernel(a),
        Command::LossSweep(a) => commands::loss_sweep(a),
        Command::GridSearch(a) => commands::grid_search_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::parse_complex;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn complex_arguments() {
        assert_eq!(parse_complex("1").unwrap(), num_complex::Complex64::new(1.0, 0.0));
        assert_eq!(parse_complex("-0.5, 2").unwrap(), num_complex::Complex64::new(-0.5, 2.0));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("nan").is_err());
    }

    #[test]
    fn numerical_errors_map_to_two() {
        let e = anyhow::Error::new(KerrError::Truncation("tail".into())).context("labelling");
        assert_eq!(exit_code(&e), NUMERICAL);
        let e = anyhow::Error::new(KerrError::InvalidInput("bad".into()));
        assert_eq!(exit_code(&e), USAGE);
        assert_eq!(exit_code(&anyhow::anyhow!("plain")), USAGE);
    }

    #[test]
    fn quoted_causes_are_not_repeated() {
        let io = std::io::Error::other("disk full");
        let e = anyhow::Error::new(KerrError::from(io)).context("writing out.csv");
        assert_eq!(describe(&e), "writing out.csv: io error: disk full");
    }
}
