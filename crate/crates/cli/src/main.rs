use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod problem;

use commands::{CheckFailure, RunContext};
use config::RunConfig;
use problem::Resolved;

#[derive(Parser)]
#[command(
    name = "restraint",
    version,
    about = "Verify minimum restraint functions, synthesize trajectories and run the dynamic-programming oracle"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports, trajectories and value tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Synthesize even without a granted certificate.
    #[arg(long, global = true)]
    force: bool,
    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Certify the candidate on its level band and build the decrease modulus.
    Verify,
    /// Build trajectories from the configured initial states.
    Synthesize,
    /// Solve the grid dynamic program and compare with U / p0_bar.
    Oracle,
    /// Summarize the reports in the output directory.
    Report,
}

/// 0 success, 1 check failure, 2 configuration error, 3 numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<restraint_core::Error>() {
            return match e {
                restraint_core::Error::Config(_) => 2,
                restraint_core::Error::NonConvergence { .. } | restraint_core::Error::StepCollapse { .. } => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<CheckFailure>().is_some() {
            return 1;
        }
    }
    1
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| restraint_core::Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path).map_err(|e| {
        if e.chain().any(|c| c.downcast_ref::<toml::de::Error>().is_some()) {
            e
        } else {
            restraint_core::Error::Config(format!("{e:#}")).into()
        }
    })?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli, command: Command) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let outcome = if let Command::Report = command {
        commands::report(&cli.out)?
    } else {
        let config = load(cli)?;
        let resolved = Resolved::new(&config);
        std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
        let ctx = RunContext {
            config,
            resolved,
            out: cli.out.clone(),
            force: cli.force,
        };
        match command {
            Command::Verify => commands::verify(&ctx)?,
            Command::Synthesize => commands::synthesize_cmd(&ctx)?,
            Command::Oracle => commands::oracle(&ctx)?,
            Command::Report => unreachable!(),
        }
    };
    println!("{}", outcome.summary);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        print!(
            "{}",
            toml::to_string(&RunConfig::defaults()).expect("defaults serialize")
        );
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (verify, synthesize, oracle, report)");
        return ExitCode::from(2);
    };
    match run(&cli, command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
