use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hostsym::config::{load_preset, preset_names, ExperimentConfig};
use hostsym::experiments::{parse_run_file, run_experiment};
use hostsym::{Error, Result};

#[derive(Parser)]
#[command(name = "hostsym", version, about = "Spatial host-symbiont simulations and reference processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunOptions {
    /// Master seed, overriding the configuration.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=hostsym::config::MAX_SEED))]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=hostsym::config::MAX_SEED))]
    replicates: Option<u64>,
    /// Output directory (default: the configured one, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration or re-run a manifest.
    Run {
        path: PathBuf,
        #[command(flatten)]
        opts: RunOptions,
    },
    /// Run a named preset, with optional `key.path=value` overrides.
    Preset {
        name: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Print the resolved configuration instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        opts: RunOptions,
    },
    ListPresets,
}

fn execute(mut config: ExperimentConfig, opts: RunOptions) -> Result<()> {
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    if let Some(r) = opts.replicates {
        config.replicates = r;
    }
    let out = opts
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name));
    if let Some(n) = opts.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    }
    let report = run_experiment(&config, &out)?;
    for line in &report.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", report.files.len(), out.display());
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { path, opts } => {
            let text = std::fs::read_to_string(&path)?;
            execute(parse_run_file(&text)?, opts)
        }
        Command::Preset { name, set, print, opts } => {
            let config = load_preset(&name, &set)?;
            if print {
                config.validate()?;
                print!("{}", config.to_toml()?);
                Ok(())
            } else {
                execute(config, opts)
            }
        }
        Command::ListPresets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
