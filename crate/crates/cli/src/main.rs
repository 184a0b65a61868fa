use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symlaw_cli::{
    bind, cmd_dataset_validate, cmd_report, cmd_run, cmd_verify, load_config, load_table, select_sample, CliError,
};
use symlaw_engine::{load_dataset, VerifyConfig};

#[derive(Parser)]
#[command(name = "symlaw", version, about = "Discover governing structures in time series")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a dataset, resuming any partial run in the output directory.
    Run {
        /// TOML configuration file.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Override a configuration value, e.g. `--set loop.max_epochs=20`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score one candidate structure against a sample.
    Verify {
        /// Sample file or dataset directory.
        #[arg(short, long)]
        sample: PathBuf,
        /// Sample id when the path holds several.
        #[arg(long)]
        id: Option<String>,
        /// TOML file with a `[verify]` table.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Equations, Boolean rules or a causal edge list.
        structure: String,
    },
    /// Regenerate report files from a run directory.
    Report { dir: PathBuf },
    /// Check a sample file or dataset directory against the schema.
    DatasetValidate { path: PathBuf },
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Run { config, overrides } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            let summary = cmd_run(&cfg)?;
            println!(
                "{} completed, {} already done, {} failed; results in {}",
                summary.completed,
                summary.skipped,
                summary.errors.len(),
                cfg.output.display()
            );
            for (id, e) in &summary.errors {
                eprintln!("{id}: {e}");
            }
            Ok(if summary.errors.is_empty() { 0 } else { 2 })
        }
        Command::Verify {
            sample,
            id,
            config,
            overrides,
            structure,
        } => {
            let mut table = load_table(config.as_deref(), &overrides)?;
            let verify: VerifyConfig = match table.remove("verify") {
                Some(toml::Value::Table(t)) => bind(t).map_err(|mut e| {
                    e.field = format!("verify.{}", e.field);
                    e
                })?,
                Some(_) => return Err(symlaw_engine::ConfigError::new("verify", "must be a table").into()),
                None => VerifyConfig::default(),
            };
            let s = select_sample(load_dataset(&sample)?, id.as_deref())?;
            print_json(&cmd_verify(&structure, &s, &verify)?);
            Ok(0)
        }
        Command::Report { dir } => {
            print!("{}", cmd_report(&dir)?.render_text());
            Ok(0)
        }
        Command::DatasetValidate { path } => {
            let samples = cmd_dataset_validate(&path)?;
            for s in &samples {
                println!("{}\t{}\tdim={}", s.id, s.task, s.dim);
            }
            println!("{} valid sample(s)", samples.len());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
