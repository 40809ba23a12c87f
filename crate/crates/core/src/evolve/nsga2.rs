use std::cmp::Ordering;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diversity::matrix_from_hashes;
use crate::problems::Dataset;

use super::{stats_row, Algorithm, AlgorithmConfig, ConfigError, Context, GenerationStats, Individual};

/// `a` dominates `b` when it is no worse in every objective and better in
/// at least one (maximization).
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut better = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            better = true;
        }
    }
    better
}

/// Indices grouped into successive non-dominated fronts, each front in
/// ascending index order.
pub fn fast_nondominated_sort<T: AsRef<[f64]>>(objectives: &[T]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for p in 0..n {
        for q in p + 1..n {
            let (a, b) = (objectives[p].as_ref(), objectives[q].as_ref());
            if dominates(a, b) {
                dominated[p].push(q);
                count[q] += 1;
            } else if dominates(b, a) {
                dominated[q].push(p);
                count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated[p] {
                count[q] -= 1;
                if count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front`, in the order given.
/// Boundary members of every objective with a non-zero spread get
/// `+inf`; objectives on which the whole front ties contribute nothing.
pub fn crowding_distance<T: AsRef<[f64]>>(objectives: &[T], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut distance = vec![0.0; m];
    if m == 0 {
        return distance;
    }
    let dims = objectives[front[0]].as_ref().len();
    let mut order: Vec<usize> = (0..m).collect();
    for k in 0..dims {
        let value = |pos: usize| objectives[front[pos]].as_ref()[k];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[m - 1]));
        let span = hi - lo;
        if !(span > 0.0) {
            continue;
        }
        distance[order[0]] = f64::INFINITY;
        distance[order[m - 1]] = f64::INFINITY;
        for w in 1..m.saturating_sub(1) {
            let (prev, next) = (value(order[w - 1]), value(order[w + 1]));
            distance[order[w]] += (next - prev) / span;
        }
    }
    distance
}

/// Lower rank wins, then larger crowding; ties keep `a`.
fn crowded_better(a: &Individual, b: &Individual) -> bool {
    match a.rank.cmp(&b.rank) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => b.crowding.total_cmp(&a.crowding) != Ordering::Greater,
    }
}

fn binary_tournament<R: Rng + ?Sized>(rng: &mut R, pop: &[Individual]) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    if crowded_better(&pop[a], &pop[b]) {
        a
    } else {
        b
    }
}

/// NSGA-2 maximizing (fitness, diversity). Returns the first front of the
/// final population, best fitness first.
pub fn run_nsga2(
    config: &AlgorithmConfig,
    train: &Dataset,
) -> Result<(Vec<Individual>, Vec<GenerationStats>), ConfigError> {
    run_nsga2_observed(config, train, |_, _, _| {})
}

/// [`run_nsga2`] that reports each generation's combined population (with
/// objectives, ranks and crowding filled in) and its fronts before
/// truncation.
pub fn run_nsga2_observed(
    config: &AlgorithmConfig,
    train: &Dataset,
    mut observer: impl FnMut(usize, &[Individual], &[Vec<usize>]),
) -> Result<(Vec<Individual>, Vec<GenerationStats>), ConfigError> {
    if config.algorithm != Algorithm::Nsga2 {
        return Err(ConfigError::WrongAlgorithm(config.algorithm));
    }
    let ctx = Context::new(config, train)?;
    let n = config.population_size;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut combined = ctx.evaluate(ctx.initial_population(&mut rng));
    let mut stats = Vec::with_capacity(config.generations);
    let mut parents = Vec::new();
    for generation in 0..config.generations {
        let hashes: Vec<_> = combined.iter().map(|i| i.hashes().clone()).collect();
        let matrix = matrix_from_hashes(&hashes);
        for (ind, d) in combined.iter_mut().zip(matrix.diversity()) {
            ind.diversity = *d;
            ind.objectives = vec![ind.fitness, ind.diversity];
        }
        let objectives: Vec<&[f64]> = combined.iter().map(|i| i.objectives.as_slice()).collect();
        let fronts = fast_nondominated_sort(&objectives);
        let mut crowding = vec![0.0; combined.len()];
        let mut rank = vec![0; combined.len()];
        for (r, front) in fronts.iter().enumerate() {
            for (&i, c) in front.iter().zip(crowding_distance(&objectives, front)) {
                crowding[i] = c;
                rank[i] = r;
            }
        }
        for (i, ind) in combined.iter_mut().enumerate() {
            ind.rank = rank[i];
            ind.crowding = crowding[i];
        }
        observer(generation, &combined, &fronts);

        let mut selected = Vec::with_capacity(n);
        for front in &fronts {
            if selected.len() + front.len() <= n {
                selected.extend_from_slice(front);
            } else {
                let mut rest = front.clone();
                rest.sort_by(|&a, &b| crowding[b].total_cmp(&crowding[a]).then(a.cmp(&b)));
                selected.extend_from_slice(&rest[..n - selected.len()]);
            }
            if selected.len() == n {
                break;
            }
        }
        let average = matrix.average_diversity_of(&selected);
        parents = selected.iter().map(|&i| combined[i].clone()).collect::<Vec<_>>();
        stats.push(stats_row(generation, &parents, average, start.elapsed().as_secs_f64()));
        if generation + 1 == config.generations {
            break;
        }

        let children: Vec<_> = (0..n)
            .map(|_| {
                let first = &parents[binary_tournament(&mut rng, &parents)];
                ctx.breed(&mut rng, first, |r| binary_tournament(r, &parents), &parents)
            })
            .collect();
        combined = parents.clone();
        combined.extend(ctx.evaluate(children));
    }
    let mut front: Vec<Individual> = parents.into_iter().filter(|i| i.rank == 0).collect();
    front.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
    Ok((front, stats))
}
