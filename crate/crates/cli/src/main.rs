use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hashgp::evolve::Algorithm;
use hashgp::hash::HashMode;
use hashgp::simplify::SimplifyOptions;
use hashgp_cli::{
    cmd_bench_distance, cmd_distance, cmd_hash, cmd_plotdata, cmd_run, cmd_simplify, with_threads,
    CliError, ExperimentConfig, Overrides, Profile,
};

#[derive(Parser)]
#[command(name = "hashgp", version, about = "Hash-based diversity for GP symbolic regression")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: seeded repetitions plus a summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed; repetition i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<HashMode>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        profile: Option<Profile>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the canonical form and per-node hashes of an expression.
    Hash {
        expression: String,
        #[arg(long, default_value = "strict")]
        mode: HashMode,
    },
    /// Simplify an expression (read from stdin when omitted).
    Simplify {
        expression: Option<String>,
        /// Only merge repeated additive terms.
        #[arg(long)]
        additive_only: bool,
    },
    /// Distance matrix and diversity of the expressions in a file (one per line).
    Distance {
        file: PathBuf,
        #[arg(long, default_value = "strict")]
        mode: HashMode,
        /// Write distance.csv and diversity.csv here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the hash-based distance matrix against the bottom-up oracle.
    BenchDistance {
        #[arg(long, default_value_t = 1000)]
        trees: usize,
        #[arg(long, default_value_t = 50)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "strict")]
        mode: HashMode,
    },
    /// Per-generation medians over the runs in an output directory.
    Plotdata {
        dir: PathBuf,
        /// CSV destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            seed,
            mode,
            algorithm,
            profile,
            repetitions,
            out: dir,
        } => {
            let overrides = Overrides {
                profile,
                seed,
                mode,
                algorithm,
                out: dir,
                repetitions,
            };
            let exp = ExperimentConfig::load(config.as_deref(), &overrides)?;
            cmd_run(&exp, out).map(|_| ())
        }
        Command::Hash { expression, mode } => cmd_hash(&expression, mode, out).map(|_| ()),
        Command::Simplify {
            expression,
            additive_only,
        } => {
            let options = if additive_only {
                SimplifyOptions::additive_only()
            } else {
                SimplifyOptions::default()
            };
            let expression = match expression {
                Some(e) => e,
                None => {
                    let mut text = String::new();
                    io::stdin()
                        .read_to_string(&mut text)
                        .map_err(CliError::runtime)?;
                    text.trim().to_string()
                }
            };
            cmd_simplify(&expression, options, out).map(|_| ())
        }
        Command::Distance { file, mode, out: dir } => {
            cmd_distance(&file, mode, dir.as_deref(), out).map(|_| ())
        }
        Command::BenchDistance {
            trees,
            size,
            seed,
            mode,
        } => cmd_bench_distance(trees, size, seed, mode, out).map(|_| ()),
        Command::Plotdata { dir, out: dest } => match dest {
            Some(path) => {
                let mut file = std::fs::File::create(&path).map_err(CliError::runtime)?;
                cmd_plotdata(&dir, &mut file).map(|_| ())
            }
            None => cmd_plotdata(&dir, out).map(|_| ()),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = with_threads(cli.threads, || {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        execute(cli.command, &mut lock)
    })
    .and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
