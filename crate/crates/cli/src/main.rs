use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtraj_cli::{parse_config, read_file, CliError, OutputFormat, Overrides, ScenarioKind};

/// Runs qtraj scenarios from JSON configs.
///
/// Settings resolve as: command-line flag, then QTRAJ_OUTPUT_DIR (output
/// directory only), then the config file, then the default.
#[derive(Parser)]
#[command(name = "qtraj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file, or re-run the config recorded in a manifest.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads for path-level parallelism (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// List the available scenarios.
    ListScenarios,
    /// Re-run a manifest in memory and compare artifact digests.
    Verify {
        manifest: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(k) = threads {
        if k == 0 {
            return Err(CliError::Config { location: "--threads".into(), message: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config { location: "--threads".into(), message: e.to_string() })?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed, output, threads, format } => {
            set_threads(threads)?;
            let cfg = parse_config(&read_file(&config)?, &Overrides { seed, output_dir: output, format })?;
            let report = qtraj_cli::run(&cfg)?;
            for (path, entry) in &report.written {
                println!("{}  {}", entry.sha256, path.display());
            }
            println!("manifest {}", report.manifest_path.display());
        }
        Command::Validate { config } => {
            let cfg = parse_config(&read_file(&config)?, &Overrides::default())?;
            println!("ok: {} (seed {}, output {})", cfg.scenario, cfg.seed, cfg.output_dir.display());
        }
        Command::ListScenarios => {
            for kind in ScenarioKind::ALL {
                println!("{:<20} {}", kind.name(), kind.description());
            }
        }
        Command::Verify { manifest, threads } => {
            set_threads(threads)?;
            for entry in qtraj_cli::verify(&read_file(&manifest)?)? {
                println!("identical  {}  {}", entry.sha256, entry.file);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
