//! `a3`: dataset construction, keyword analysis and opinion-in-the-loop
//! experiments from the command line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::Settings;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "a3", version, about = "Label news against analyst and institutional behavior, and run opinion-in-the-loop experiments")]
struct Cli {
    /// TOML settings file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More diagnostics on stderr (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus directory and print the validation report
    Ingest(Settings),
    /// Build, label, sample and split instances into dataset.jsonl
    Label(Settings),
    /// Re-split an existing dataset with new ratios or seed
    Split(Settings),
    /// Class-conditional PMI keywords
    Pmi(Settings),
    /// Write a synthetic corpus with ground truth
    Synth(Settings),
    /// Collect generator opinions for every news item in a dataset
    Generate(Settings),
    /// Train and evaluate a classifier, with or without opinions
    Run(Settings),
    /// Score predictions against gold labels or reference texts
    Eval(Settings),
}

impl Command {
    fn parts(&self) -> (&'static str, &Settings) {
        match self {
            Command::Ingest(s) => ("ingest", s),
            Command::Label(s) => ("label", s),
            Command::Split(s) => ("split", s),
            Command::Pmi(s) => ("pmi", s),
            Command::Synth(s) => ("synth", s),
            Command::Generate(s) => ("generate", s),
            Command::Run(s) => ("run", s),
            Command::Eval(s) => ("eval", s),
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let (name, flags) = cli.command.parts();
    let file = match &cli.config {
        Some(path) => config::load_file(path, name)?,
        None => Settings::default(),
    };
    let settings = config::merge(name, file, flags)?;
    let jobs = settings.jobs.unwrap_or(4);
    if jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(CliError::runtime)?;
    let mut resolved = settings.clone();
    resolved.jobs = Some(jobs);
    let ctx = Ctx {
        config: config::snapshot(name, &resolved),
        s: resolved,
    };
    match name {
        "ingest" => commands::ingest(&ctx),
        "label" => commands::label(&ctx),
        "split" => commands::split(&ctx),
        "pmi" => commands::pmi(&ctx),
        "synth" => commands::synth(&ctx),
        "generate" => commands::generate(&ctx),
        "run" => commands::run(&ctx),
        "eval" => commands::eval(&ctx),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
