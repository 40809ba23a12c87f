//! Library side of the `hashgp` command-line tool: experiment runner,
//! aggregation and the hash / simplify / distance utilities.

pub mod config;
pub mod plotdata;
pub mod run;
pub mod tools;

use std::fmt::Display;

pub use config::{ExperimentConfig, Overrides, Profile};
pub use plotdata::cmd_plotdata;
pub use run::{cmd_run, quantile, RunRecord, Summary};
pub use tools::{cmd_bench_distance, cmd_distance, cmd_hash, cmd_simplify, BenchReport};

/// Failure of a command, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, config or input text; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Failure while executing a valid request; exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn usage(e: impl Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn runtime(e: impl Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `None`. Without the `parallel` feature everything is single-threaded.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(0) => Err(CliError::usage("--threads must be at least 1")),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(CliError::runtime)?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if threads == Some(0) {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        Ok(f())
    }
}
