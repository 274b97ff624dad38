//! `dam`: train, evaluate and inspect dual-attention sentiment models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dam", version, about = "Aspect-level sentiment classification with dual attention")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Train a model from a config file; any config key can be overridden with `--<key> <value>`.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Report accuracy and macro-F1 of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Where to write the JSON report (default: `metrics.json` next to the checkpoint).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Predict one example and export its attention weights.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// 0-based line index into the dataset.
        #[arg(long)]
        index: usize,
        /// Where to write the JSON trace (default: `explain.json` next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated dataset.
    Synth {
        #[arg(long, value_enum)]
        kind: commands::SynthKind,
        /// Number of examples (label-cue corpus only).
        #[arg(long, default_value_t = 600)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// `--<key> <value>` for every config key, applied after the config file.
#[derive(Debug, Default)]
struct Overrides(Vec<(String, String)>);

impl FromArgMatches for Overrides {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = Vec::new();
        for key in config::all_keys() {
            if let Some(v) = m.get_one::<String>(key) {
                out.push((key.to_string(), v.clone()));
            }
        }
        Ok(Self(out))
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for Overrides {
    fn augment_args(cmd: Command) -> Command {
        config::all_keys().fold(cmd, |cmd, key| {
            cmd.arg(
                clap::Arg::new(key)
                    .long(key)
                    .value_name("VALUE")
                    .help_heading("Config overrides")
                    .num_args(1),
            )
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Cmd::Train { config, overrides } => commands::train(&config, &overrides.0),
        Cmd::Eval { checkpoint, data, report } => commands::eval(&checkpoint, &data, report.as_deref()),
        Cmd::Explain { checkpoint, data, index, out } => commands::explain(&checkpoint, &data, index, out.as_deref()),
        Cmd::Synth { kind, count, seed, out } => commands::synth(kind, count, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
