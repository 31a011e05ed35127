use std::path::PathBuf;
use std::process::ExitCode;

use bistab::config::OutputConfig;
use bistab::{parse_config, presets, run, CliError, RunContext};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bistab", version, about = "Feedback stabilization experiments for bilinear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    /// Output directory (overrides output.dir and BISTAB_OUT)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the initial state and the observability samples
    #[arg(long)]
    seed: Option<u64>,
    /// Skip SVG plots
    #[arg(long)]
    no_plots: bool,
    /// Suppress progress messages
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a named preset bundle and its checks
    Preset {
        #[arg(value_parser = presets::PRESETS)]
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Parse a config and print its effective values
    Validate { config: PathBuf },
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

fn out_dir(flags: &RunFlags, configured: PathBuf) -> PathBuf {
    flags.out.clone().or_else(|| std::env::var_os("BISTAB_OUT").map(PathBuf::from)).unwrap_or(configured)
}

fn finish(outcome: bistab::RunOutcome, quiet: bool) -> Result<(), CliError> {
    if !quiet {
        for path in &outcome.artifacts {
            println!("{}", path.display());
        }
    }
    if outcome.failed_checks.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance { failed: outcome.failed_checks.len(), names: outcome.failed_checks.join("; ") })
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, flags } => {
            let mut cfg = parse_config(&read(&config)?)?;
            cfg.output.dir = out_dir(&flags, cfg.output.dir.clone());
            if let Some(seed) = flags.seed {
                cfg.set_seed(seed);
            }
            if flags.no_plots {
                cfg.output.emit_plots = false;
            }
            let ctx = RunContext { quiet: flags.quiet };
            if let (bistab::Mode::Preset, Some(name)) = (cfg.mode, cfg.preset.clone()) {
                let bundle = presets::run_preset(&name, &cfg.output, flags.seed, &ctx)?;
                return finish(bundle.into_outcome(), flags.quiet);
            }
            finish(run(&cfg, &ctx)?, flags.quiet)
        }
        Command::Preset { name, flags } => {
            let output = OutputConfig {
                dir: out_dir(&flags, PathBuf::from("bistab-out")),
                emit_plots: !flags.no_plots,
                plot_timestamp: false,
            };
            let ctx = RunContext { quiet: flags.quiet };
            let bundle = presets::run_preset(&name, &output, flags.seed, &ctx)?;
            if !flags.quiet {
                for c in &bundle.checks {
                    eprintln!("{} {}: {:e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.detail);
                }
            }
            finish(bundle.into_outcome(), flags.quiet)
        }
        Command::Validate { config } => {
            let cfg = parse_config(&read(&config)?)?;
            print!("{}", cfg.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let report = CliError::Invalid(e.to_string().trim().to_string()).report();
            eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = e.report();
            eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
            ExitCode::from(report.exit_code as u8)
        }
    }
}
