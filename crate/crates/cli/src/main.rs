//! `robust-elicit`: operator entry points.
//!
//! Exit codes: 0 success, 2 usage, 3 invalid data or unreadable files,
//! 4 numerical failure.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, ExperimentArgs, GenerateArgs, LookupBuildArgs, SelftestArgs, ServeArgs};

#[derive(Debug, Parser)]
#[command(name = "robust-elicit", version, about = "Robust preference elicitation toolkit")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Random CCU allocation policies.
    Policies {
        #[command(subcommand)]
        action: PoliciesCommand,
    },
    /// Precomputed robust queries.
    Lookup {
        #[command(subcommand)]
        action: LookupCommand,
    },
    /// Run the questionnaire service.
    Serve(ServeArgs),
    /// Synthetic comparisons of robust and random elicitation.
    Experiment {
        #[command(subcommand)]
        action: ExperimentCommand,
    },
    /// Clean a session export and summarize the final comparisons.
    Analyze(AnalyzeArgs),
    /// Compare the solver against brute-force references.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
enum PoliciesCommand {
    /// Simulate random policies and write their normalized features.
    Generate(GenerateArgs),
}

#[derive(Debug, Subcommand)]
enum LookupCommand {
    /// Solve every response path up to a depth.
    Build(LookupBuildArgs),
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Run synthetic agents through both strategies.
    Run(ExperimentArgs),
}

#[derive(Debug, Clone, Copy)]
pub struct Output {
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out = Output { json: cli.json };
    let result = match cli.command {
        Command::Policies {
            action: PoliciesCommand::Generate(args),
        } => commands::policies_generate(args, out),
        Command::Lookup {
            action: LookupCommand::Build(args),
        } => commands::lookup_build(args, out),
        Command::Serve(args) => commands::serve(args, out),
        Command::Experiment {
            action: ExperimentCommand::Run(args),
        } => commands::experiment_run(args, out),
        Command::Analyze(args) => commands::analyze(args, out),
        Command::Selftest(args) => commands::selftest(args, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
