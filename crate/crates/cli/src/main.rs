use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vofdm_cli::config::{self, ConfigError, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(
    name = "vofdm",
    version,
    about = "VOFDM impulsive-noise simulation runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV and manifest.
    Run(ConfigArgs),
    /// Check a config and print every problem found.
    Validate(ConfigArgs),
    /// List the available experiment kinds.
    ListExperiments,
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Set a config field, e.g. `--override noise.sinr_db=-20`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            out: self.out.clone(),
            assignments: self.overrides.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<28} {}", k.name(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate(a) => {
            let loaded = match config::load(&a.config, &a.overrides()) {
                Ok(l) => l,
                Err(e) => return fail(&e.into()),
            };
            let diags = config::validate(&loaded);
            if diags.is_empty() {
                println!("{}: ok", a.config.display());
                ExitCode::SUCCESS
            } else {
                fail(&ConfigError::Invalid(diags).into())
            }
        }
        Command::Run(a) => {
            let result = config::load(&a.config, &a.overrides())
                .map_err(vofdm_cli::RunError::from)
                .and_then(|l| vofdm_cli::run(&l));
            match result {
                Ok(m) => {
                    eprintln!(
                        "wrote {} ({} rows) in {:.1}s",
                        m.csv_path.display(),
                        m.rows,
                        m.duration_seconds
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}

fn fail(e: &vofdm_cli::RunError) -> ExitCode {
    // Every error's message already embeds its cause.
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
