use std::path::PathBuf;
use std::process::ExitCode;

use bragg_walk::analysis::MODE_PEAK_THRESHOLD;
use bragg_walk_cli::commands::{convolve_cmd, fit_cmd, load_config, simulate, spectrum_cmd, sweep};
use bragg_walk_cli::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bragg-walk",
    version,
    about = "Quantum walk simulation of neutron Bragg cavities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one cavity and write maps, traces and a summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from a checkpoint written by `--checkpoint`.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Write the final state here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Final confined intensity over the `[sweep]` gap list.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Spectrum of a two-column trace file (position, value).
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = MODE_PEAK_THRESHOLD)]
        threshold: f64,
        /// Sum adjacent sample pairs first (removes lattice parity alternation).
        #[arg(long)]
        merge_pairs: bool,
    },
    /// Reflectivity fit of a two-column (bounce, intensity) file.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
    },
    /// Convolve a two-column exit trace with a beam profile file.
    Convolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
    },
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            resume,
            checkpoint,
        } => {
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.output.directory.clone());
            simulate(&cfg, &out, resume.as_deref(), checkpoint.as_deref())
        }
        Command::Sweep {
            config,
            out,
            workers,
        } => {
            if workers == 0 {
                return Err(CliError::Config("--workers must be >= 1".into()));
            }
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.output.directory.clone());
            let outcome = sweep(&cfg, &out, workers)?;
            for p in &outcome.written {
                println!("{}", p.display());
            }
            match outcome.failure {
                Some(e) => Err(e),
                None => Ok(Vec::new()),
            }
        }
        Command::Spectrum {
            input,
            out,
            threshold,
            merge_pairs,
        } => spectrum_cmd(&input, &out, threshold, merge_pairs),
        Command::Fit {
            input,
            out,
            from,
            to,
        } => fit_cmd(&input, &out, [from, to]),
        Command::Convolve {
            input,
            profile,
            out,
            threshold,
        } => convolve_cmd(&input, &profile, &out, threshold),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
