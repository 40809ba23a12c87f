//! The `run` command: seeded repetitions, per-run outputs and a summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hashgp::evolve::{
    linear_scaling, r_squared, run_ga, run_nsga2, write_stats_csv, Algorithm, AlgorithmConfig,
    GenerationStats, Individual,
};
use hashgp::expr::evaluate;
use hashgp::problems::Dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{CliError, ExperimentConfig};

/// Outcome of one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub train_r2: f64,
    pub test_r2: f64,
    pub length: usize,
    pub wall_time_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        Spread {
            median: quantile(&v, 0.5),
            q1,
            q3,
            iqr: q3 - q1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub algorithm: String,
    pub repetitions: usize,
    pub train_r2: Spread,
    pub test_r2: Spread,
    pub wall_time_seconds: Spread,
    pub runs: Vec<RunRecord>,
}

/// Quantile of ascending `sorted` by linear interpolation between order
/// statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::runtime(e)
}

pub fn run_dir(output: &Path, run: usize) -> PathBuf {
    output.join(format!("run_{run:03}"))
}

struct Outcome {
    best: Individual,
    front: Vec<Individual>,
    stats: Vec<GenerationStats>,
}

fn evolve(config: &AlgorithmConfig, train: &Dataset) -> Result<Outcome, CliError> {
    match config.algorithm {
        Algorithm::Nsga2 => {
            let (front, stats) = run_nsga2(config, train).map_err(CliError::usage)?;
            let best = front.first().cloned().ok_or_else(|| runtime("empty front"))?;
            Ok(Outcome { best, front, stats })
        }
        _ => {
            let (best, stats) = run_ga(config, train).map_err(CliError::usage)?;
            Ok(Outcome {
                front: vec![best.clone()],
                best,
                stats,
            })
        }
    }
}

fn predictions(ind: &Individual, data: &Dataset) -> Vec<f64> {
    evaluate(ind.tree(), data.features()).unwrap_or_else(|_| vec![f64::NAN; data.rows()])
}

fn run_one(
    exp: &ExperimentConfig,
    run: usize,
    train: &Dataset,
    test: &Dataset,
) -> Result<RunRecord, CliError> {
    let start = Instant::now();
    let mut config = exp.algorithm.clone();
    config.seed = exp.algorithm.seed.wrapping_add(run as u64);
    let outcome = evolve(&config, train)?;
    let wall = start.elapsed().as_secs_f64();

    let (y_train, y_test) = (train.target_vec(), test.target_vec());
    let p_train = predictions(&outcome.best, train);
    let p_test = predictions(&outcome.best, test);
    let train_r2 = r_squared(&p_train, &y_train).map_err(runtime)?;
    let test_r2 = if test.rows() >= 2 {
        r_squared(&p_test, &y_test).map_err(runtime)?
    } else {
        f64::NAN
    };
    let (intercept, slope) = linear_scaling(&p_train, &y_train);
    let names = train.feature_names();
    let infix = outcome.best.tree().to_infix_with(&names);

    let dir = run_dir(&exp.output, run);
    fs::create_dir_all(&dir).map_err(runtime)?;
    let file = fs::File::create(dir.join("generations.csv")).map_err(runtime)?;
    write_stats_csv(&outcome.stats, file).map_err(runtime)?;

    let mut timing = csv::Writer::from_path(dir.join("timing.csv")).map_err(runtime)?;
    timing.write_record(["generation", "elapsed_seconds"]).map_err(runtime)?;
    for s in &outcome.stats {
        timing
            .write_record([s.generation.to_string(), format!("{:?}", s.elapsed)])
            .map_err(runtime)?;
    }
    timing.flush().map_err(runtime)?;

    let front: Vec<_> = outcome
        .front
        .iter()
        .map(|i| {
            json!({
                "model": i.tree().to_infix_with(&names),
                "fitness": i.fitness,
                "diversity": i.diversity,
                "length": i.tree().len(),
            })
        })
        .collect();
    let model = json!({
        "problem": exp.problem.name(),
        "algorithm": config.algorithm.name(),
        "seed": config.seed,
        "variables": names,
        "target": train.target_name(),
        "model": infix,
        "model_xi": outcome.best.tree().to_infix(),
        "intercept": intercept,
        "slope": slope,
        "scaled_model": format!("({intercept:?} + ({slope:?} * {infix}))"),
        "length": outcome.best.tree().len(),
        "depth": outcome.best.tree().depth(),
        "train_r2": train_r2,
        "test_r2": test_r2,
        "front": front,
        "config": config,
        "wall_time_seconds": wall,
    });
    let text = serde_json::to_string_pretty(&model).map_err(runtime)?;
    fs::write(dir.join("model.json"), text + "\n").map_err(runtime)?;

    Ok(RunRecord {
        run,
        seed: config.seed,
        train_r2,
        test_r2,
        length: outcome.best.tree().len(),
        wall_time_seconds: wall,
    })
}

/// Runs every repetition (in parallel when enabled), writes per-run files
/// under `run_NNN/` and `summary.json` in the output directory.
pub fn cmd_run(exp: &ExperimentConfig, out: &mut dyn Write) -> Result<Summary, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(exp.data_seed);
    let (train, test) = exp.problem.load(&mut rng).map_err(CliError::usage)?;
    fs::create_dir_all(&exp.output).map_err(|e| {
        CliError::runtime(format!("cannot create {}: {e}", exp.output.display()))
    })?;
    let records = hashgp::par::map_range(exp.repetitions, |i| run_one(exp, i, &train, &test));
    let runs = records.into_iter().collect::<Result<Vec<_>, _>>()?;

    let pick = |f: fn(&RunRecord) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    let summary = Summary {
        problem: exp.problem.name().to_string(),
        algorithm: exp.algorithm.algorithm.name().to_string(),
        repetitions: exp.repetitions,
        train_r2: Spread::of(&pick(|r| r.train_r2)),
        test_r2: Spread::of(&pick(|r| r.test_r2)),
        wall_time_seconds: Spread::of(&pick(|r| r.wall_time_seconds)),
        runs,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    fs::write(exp.output.join("summary.json"), text + "\n").map_err(runtime)?;
    writeln!(
        out,
        "{} / {}: train R2 {:.4} (IQR {:.4}), test R2 {:.4} (IQR {:.4}) over {} runs -> {}",
        summary.problem,
        summary.algorithm,
        summary.train_r2.median,
        summary.train_r2.iqr,
        summary.test_r2.median,
        summary.test_r2.iqr,
        summary.repetitions,
        exp.output.display()
    )
    .map_err(runtime)?;
    Ok(summary)
}
