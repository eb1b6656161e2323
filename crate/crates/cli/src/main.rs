//! `rotbox`: rotated-box detection toolkit on the command line.
//!
//! Structured results go to stdout (or `--out`) as JSON tagged with
//! `"schema": "rotbox/1"`, bulk tables as CSV, tensors as RBT1 files.
//! Failures print one JSON line `{"error":{"code":..,"message":..}}` to stderr.

mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rotbox", version, about = "Rotated-box detection toolkit")]
struct Cli {
    /// Worker threads for parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Iou(IouArgs),
    Nms(NmsArgs),
    Anchors(AnchorsArgs),
    Encode(EncodeArgs),
    Decode(DecodeArgs),
    Assign(AssignArgs),
    Sample(SampleArgs),
    Loss(LossArgs),
    DfpnForward(DfpnArgs),
    Roialign(RoiAlignArgs),
    Eval(EvalArgs),
    PrCurve(PrCurveArgs),
    TilePlan(TilePlanArgs),
    Merge(MergeArgs),
    Bench(BenchArgs),
}

fn run(cmd: Command) -> error::Result<()> {
    match cmd {
        Command::Iou(a) => a.run(),
        Command::Nms(a) => a.run(),
        Command::Anchors(a) => a.run(),
        Command::Encode(a) => a.run(),
        Command::Decode(a) => a.run(),
        Command::Assign(a) => a.run(),
        Command::Sample(a) => a.run(),
        Command::Loss(a) => a.run(),
        Command::DfpnForward(a) => a.run(),
        Command::Roialign(a) => a.run(),
        Command::Eval(a) => a.run(),
        Command::PrCurve(a) => a.run(),
        Command::TilePlan(a) => a.run(),
        Command::Merge(a) => a.run(),
        Command::Bench(a) => a.run(),
    }
}

fn report(e: &CliError) {
    let line = serde_json::json!({ "error": { "code": e.code(), "message": e.to_string() } });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            report(&CliError::Usage(first));
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            report(&CliError::Usage(format!("thread pool: {e}")));
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}
