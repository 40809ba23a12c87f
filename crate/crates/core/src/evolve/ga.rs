use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diversity::matrix_from_hashes;
use crate::problems::Dataset;

use super::{argmax, stats_row, Algorithm, AlgorithmConfig, ConfigError, Context, GenerationStats, Individual};

/// Best of `size` uniform draws (with replacement) by `score`; ties go to
/// the earliest draw.
pub(crate) fn tournament<R: Rng + ?Sized>(rng: &mut R, score: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..score.len());
    for _ in 1..size {
        let c = rng.random_range(0..score.len());
        if score[c] > score[best] {
            best = c;
        }
    }
    best
}

/// Generational GA with elitism. With [`Algorithm::GaDiversity`] the
/// tournament compares `fitness + diversity`; elites are always chosen by
/// raw fitness. Stats row 0 describes the initial population.
pub fn run_ga(
    config: &AlgorithmConfig,
    train: &Dataset,
) -> Result<(Individual, Vec<GenerationStats>), ConfigError> {
    if config.algorithm == Algorithm::Nsga2 {
        return Err(ConfigError::WrongAlgorithm(config.algorithm));
    }
    let ctx = Context::new(config, train)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pop = ctx.evaluate(ctx.initial_population(&mut rng));
    let mut stats = Vec::with_capacity(config.generations);
    for generation in 0..config.generations {
        let hashes: Vec<_> = pop.iter().map(|i| i.hashes().clone()).collect();
        let matrix = matrix_from_hashes(&hashes);
        for (ind, d) in pop.iter_mut().zip(matrix.diversity()) {
            ind.diversity = *d;
        }
        stats.push(stats_row(
            generation,
            &pop,
            matrix.average_diversity(),
            start.elapsed().as_secs_f64(),
        ));
        if generation + 1 == config.generations {
            break;
        }
        let score: Vec<f64> = match config.algorithm {
            Algorithm::GaDiversity => pop.iter().map(|i| i.fitness + i.diversity).collect(),
            _ => pop.iter().map(|i| i.fitness).collect(),
        };
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness).then(a.cmp(&b)));
        let elites: Vec<Individual> = order[..config.elite_count].iter().map(|&i| pop[i].clone()).collect();

        let mut children = Vec::with_capacity(config.population_size - elites.len());
        while children.len() + elites.len() < config.population_size {
            let first = &pop[tournament(&mut rng, &score, config.tournament_size)];
            let child = ctx.breed(
                &mut rng,
                first,
                |r| tournament(r, &score, config.tournament_size),
                &pop,
            );
            children.push(child);
        }
        let mut next = elites;
        next.extend(ctx.evaluate(children));
        pop = next;
    }
    let best = argmax(pop.iter().map(|i| i.fitness));
    Ok((pop.swap_remove(best), stats))
}
