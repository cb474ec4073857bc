use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bayaircomp::experiment::{run_suite, ExperimentConfig, Suite};
use bayaircomp::rng::expand_seeds;
use bayaircomp::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Bayesian over-the-air aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        suite: Option<Suite>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override any config key, e.g. `--set rounds=100`.
        #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
        overrides: Vec<(String, String)>,
    },
    /// Check a config file and print every diagnostic.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
        overrides: Vec<(String, String)>,
    },
    /// Expand a master seed into per-run seeds, one per line.
    Seeds {
        #[arg(long)]
        master: u64,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

fn load(config: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let errors = cfg.validate();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

fn report(err: &Error) {
    match err {
        Error::Config(errors) => {
            eprintln!("error: invalid configuration");
            for e in errors {
                eprintln!("  - {e}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            suite,
            output_dir,
            mut overrides,
        } => {
            if let Some(seed) = seed {
                overrides.push(("seed".into(), seed.to_string()));
            }
            if let Some(suite) = suite {
                overrides.push(("suite".into(), format!("\"{suite}\"")));
            }
            if let Some(dir) = output_dir {
                overrides.push((
                    "output_dir".into(),
                    format!("{:?}", dir.display().to_string()),
                ));
            }
            load(&config, &overrides)
                .and_then(|cfg| run_suite(&cfg))
                .map(|outcome| {
                    println!("config_hash {}", outcome.config_hash);
                    for path in outcome.artifacts {
                        println!("wrote {}", path.display());
                    }
                })
        }
        Command::Validate { config, overrides } => load(&config, &overrides).map(|cfg| {
            println!(
                "ok: suite {} seed {} hash {}",
                cfg.suite,
                cfg.seed,
                cfg.hash()
            );
        }),
        Command::Seeds { master, count } => {
            for seed in expand_seeds(master, count) {
                println!("{seed}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}
