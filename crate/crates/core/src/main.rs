use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use manso::eval;

/// Output root for `run`; defaults to the current directory.
const OUTPUT_ROOT_ENV: &str = "MANSO_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "manso", version, about = "Multistart optimization experiments for noisy objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, instance) pair of an experiment config.
    Run {
        config: PathBuf,
        /// Overrides $MANSO_OUTPUT_ROOT.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Recompute hits, profiles and plots of an artifact directory.
    Profile { dir: PathBuf },
    /// Print a summary of an artifact directory.
    Report { dir: PathBuf },
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> manso::Result<()> {
    match cli.command {
        Command::Run { config, output_root: root } => {
            let out = eval::run_experiment(&config, &output_root(root))?;
            println!("wrote {}", out.dir.display());
            print!("{}", eval::report(&out.dir)?);
        }
        Command::Profile { dir } => {
            let out = eval::profile_artifacts(Path::new(&dir))?;
            println!("wrote {} profile curves to {}", out.profiles.len(), out.dir.display());
        }
        Command::Report { dir } => print!("{}", eval::report(&dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("manso: {e}");
            ExitCode::FAILURE
        }
    }
}
