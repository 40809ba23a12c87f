//! Evolutionary drivers: generational GA, diversity-augmented GA and NSGA-2
//! over (fitness, diversity).

mod ga;
mod nsga2;
mod operators;

pub use ga::run_ga;
pub use nsga2::{
    crowding_distance, dominates, fast_nondominated_sort, run_nsga2, run_nsga2_observed,
};
pub use operators::{mutate, mutate_with, subtree_crossover, Limits, MutationKind, MutationWeights};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diversity::SortedHashes;
use crate::expr::{evaluate, ExpressionTree, Grammar, GrammarError, NodeKind};
use crate::hash::{HashMode, TreeHasher, DEFAULT_SEED};
use crate::par;
use crate::problems::Dataset;
use crate::simplify::Simplifier;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[default]
    #[serde(rename = "ga")]
    Ga,
    #[serde(rename = "ga-div")]
    GaDiversity,
    #[serde(rename = "nsga2")]
    Nsga2,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::GaDiversity => "ga-div",
            Algorithm::Nsga2 => "nsga2",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ga" => Ok(Algorithm::Ga),
            "ga-div" | "gadiversity" | "ga-diversity" => Ok(Algorithm::GaDiversity),
            "nsga2" | "nsga-2" => Ok(Algorithm::Nsga2),
            _ => Err(format!("unknown algorithm `{s}` (expected ga, ga-div or nsga2)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("{name} = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("elite_count {elite} must be below population_size {population}")]
    Elites { elite: usize, population: usize },
    #[error("run_ga needs algorithm ga or ga-div, got {0}")]
    WrongAlgorithm(Algorithm),
    #[error("max_depth must be at least 2")]
    Depth,
    #[error("max_length must be at least the largest function arity + 1")]
    Length,
    #[error("bad constant range [{0}, {1}]")]
    ConstantRange(f64, f64),
    #[error("dataset has no input columns")]
    NoFeatures,
    #[error("dataset needs at least 2 rows")]
    TooFewRows,
    #[error("{0}")]
    Grammar(#[from] GrammarError),
}

/// Every knob of a single evolutionary run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub mutation_probability: f64,
    pub crossover_probability: f64,
    pub max_length: usize,
    pub max_depth: usize,
    pub hash_mode: HashMode,
    #[serde(with = "hex_seed")]
    pub hash_seed: u64,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub constant_range: [f64; 2],
    pub functions: Vec<NodeKind>,
    pub mutation_weights: MutationWeights,
    /// Simplify every offspring before evaluation.
    pub simplify_offspring: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            population_size: 100,
            generations: 50,
            tournament_size: 5,
            elite_count: 1,
            mutation_probability: 0.25,
            crossover_probability: 1.0,
            max_length: 50,
            max_depth: 12,
            hash_mode: HashMode::Strict,
            hash_seed: DEFAULT_SEED,
            algorithm: Algorithm::Ga,
            seed: 0,
            constant_range: [-5.0, 5.0],
            functions: NodeKind::BINARY.iter().chain(&NodeKind::UNARY).copied().collect(),
            mutation_weights: MutationWeights::default(),
            simplify_offspring: false,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("population_size", self.population_size),
            ("generations", self.generations),
            ("tournament_size", self.tournament_size),
            ("max_length", self.max_length),
            ("max_depth", self.max_depth),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        for (name, value) in [
            ("mutation_probability", self.mutation_probability),
            ("crossover_probability", self.crossover_probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability { name, value });
            }
        }
        if self.elite_count >= self.population_size && self.population_size > 0 {
            return Err(ConfigError::Elites {
                elite: self.elite_count,
                population: self.population_size,
            });
        }
        if self.max_depth < 2 {
            return Err(ConfigError::Depth);
        }
        let [lo, hi] = self.constant_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(ConfigError::ConstantRange(lo, hi));
        }
        self.mutation_weights.validate()?;
        let g = self.grammar(1);
        g.check()?;
        if self.max_length < g.max_arity() + 1 {
            return Err(ConfigError::Length);
        }
        Ok(())
    }

    pub fn grammar(&self, variables: usize) -> Grammar {
        Grammar::new(variables)
            .with_functions(&self.functions)
            .with_constant_range(self.constant_range[0], self.constant_range[1])
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_length: self.max_length,
            max_depth: self.max_depth,
        }
    }

    pub fn hasher(&self) -> TreeHasher {
        TreeHasher::with_seed(self.hash_mode, self.hash_seed)
    }
}

/// Hash seeds use the full `u64` range, which TOML integers cannot hold, so
/// they are written as hex strings; plain integers are accepted on input.
mod hex_seed {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{seed:#018x}"))
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => {
                let t = t.trim();
                let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                    Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
                    None => t.replace('_', "").parse(),
                };
                parsed.map_err(|_| de::Error::custom(format!("bad hash seed `{t}`")))
            }
        }
    }
}

/// Squared Pearson correlation, `0` for non-finite or constant input.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Result<f64, LengthMismatch> {
    if predictions.len() != targets.len() {
        return Err(LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    let n = predictions.len();
    if n < 2 || predictions.iter().chain(targets).any(|v| !v.is_finite()) {
        return Ok(0.0);
    }
    let mp = predictions.iter().sum::<f64>() / n as f64;
    let mt = targets.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in predictions.iter().zip(targets) {
        let (dp, dt) = (p - mp, t - mt);
        sxy += dp * dt;
        sxx += dp * dp;
        syy += dt * dt;
    }
    if sxx == 0.0 || syy == 0.0 || !(sxx * syy).is_finite() {
        return Ok(0.0);
    }
    let r2 = sxy * sxy / (sxx * syy);
    Ok(if r2.is_finite() { r2.clamp(0.0, 1.0) } else { 0.0 })
}

#[derive(Debug, Error, PartialEq)]
#[error("{predictions} predictions for {targets} targets")]
pub struct LengthMismatch {
    pub predictions: usize,
    pub targets: usize,
}

/// Least-squares `(intercept, slope)` mapping predictions onto targets.
/// Falls back to `(mean target, 0)` when predictions are constant or not
/// finite.
pub fn linear_scaling(predictions: &[f64], targets: &[f64]) -> (f64, f64) {
    let n = predictions.len().min(targets.len());
    if n == 0 {
        return (0.0, 0.0);
    }
    let mt = targets[..n].iter().sum::<f64>() / n as f64;
    if predictions[..n].iter().any(|v| !v.is_finite()) {
        return (mt, 0.0);
    }
    let mp = predictions[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (p, t) in predictions[..n].iter().zip(&targets[..n]) {
        sxy += (p - mp) * (t - mt);
        sxx += (p - mp) * (p - mp);
    }
    if sxx == 0.0 || !(sxy / sxx).is_finite() {
        return (mt, 0.0);
    }
    let slope = sxy / sxx;
    (mt - slope * mp, slope)
}

/// R² of a tree's predictions; `0` when evaluation fails.
pub fn fitness(tree: &ExpressionTree, features: ArrayView2<'_, f64>, targets: &[f64]) -> f64 {
    match evaluate(tree, features) {
        Ok(pred) => r_squared(&pred, targets).unwrap_or(0.0),
        Err(_) => 0.0,
    }
}

/// A tree with its cached hash sequence and selection bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    tree: ExpressionTree,
    hashes: SortedHashes,
    pub fitness: f64,
    pub diversity: f64,
    pub objectives: Vec<f64>,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn new(tree: ExpressionTree, hasher: &TreeHasher) -> Self {
        let hashes = crate::diversity::sorted_hashes(hasher, &tree);
        Individual {
            tree,
            hashes,
            fitness: 0.0,
            diversity: 0.0,
            objectives: Vec::new(),
            rank: 0,
            crowding: 0.0,
        }
    }

    pub fn tree(&self) -> &ExpressionTree {
        &self.tree
    }

    pub fn hashes(&self) -> &SortedHashes {
        &self.hashes
    }

    /// Replaces the tree, rehashing it and clearing all scores.
    pub fn set_tree(&mut self, tree: ExpressionTree, hasher: &TreeHasher) {
        *self = Individual::new(tree, hasher);
    }
}

/// One row of the per-generation trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub median_fitness: f64,
    pub average_diversity: f64,
    pub average_length: f64,
    /// Seconds since the run started; not part of the deterministic trace.
    pub elapsed: f64,
}

impl GenerationStats {
    pub const HEADER: [&'static str; 5] = [
        "generation",
        "best_fitness",
        "median_fitness",
        "average_diversity",
        "average_length",
    ];

    /// Deterministic fields, rendered exactly.
    pub fn record(&self) -> [String; 5] {
        [
            self.generation.to_string(),
            format!("{:?}", self.best_fitness),
            format!("{:?}", self.median_fitness),
            format!("{:?}", self.average_diversity),
            format!("{:?}", self.average_length),
        ]
    }
}

/// Writes the trace without timing so equal runs produce equal bytes.
pub fn write_stats_csv<W: Write>(stats: &[GenerationStats], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GenerationStats::HEADER)?;
    for s in stats {
        w.write_record(s.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Median of a non-empty slice; mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// State shared by both drivers.
pub(crate) struct Context<'a> {
    pub config: &'a AlgorithmConfig,
    pub data: &'a Dataset,
    pub targets: Vec<f64>,
    pub grammar: Grammar,
    pub hasher: TreeHasher,
    pub simplifier: Option<Simplifier>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a AlgorithmConfig, data: &'a Dataset) -> Result<Self, ConfigError> {
        config.validate()?;
        let vars = data.features().ncols();
        if vars == 0 {
            return Err(ConfigError::NoFeatures);
        }
        if data.rows() < 2 {
            return Err(ConfigError::TooFewRows);
        }
        Ok(Context {
            config,
            data,
            targets: data.target_vec(),
            grammar: config.grammar(vars),
            hasher: config.hasher(),
            simplifier: config.simplify_offspring.then(Simplifier::default),
        })
    }

    /// PTC2 trees with target lengths uniform over what the limits allow.
    pub fn initial_population<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ExpressionTree> {
        let slack = self.grammar.max_arity().saturating_sub(1);
        let top = self.config.max_length.saturating_sub(slack).max(1);
        (0..self.config.population_size)
            .map(|_| {
                let target = rng.random_range(1..=top);
                operators::ptc2_within(rng, &self.grammar, target, self.config.max_depth)
            })
            .collect()
    }

    /// Hashes and scores trees in parallel, preserving order.
    pub fn evaluate(&self, trees: Vec<ExpressionTree>) -> Vec<Individual> {
        par::map(&trees, |t| {
            let t = match &self.simplifier {
                Some(s) => s.simplify(t).0,
                None => t.clone(),
            };
            let mut ind = Individual::new(t, &self.hasher);
            ind.fitness = fitness(ind.tree(), self.data.features(), &self.targets);
            ind
        })
    }

    pub fn breed<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        first: &Individual,
        second: impl FnOnce(&mut R) -> usize,
        population: &[Individual],
    ) -> ExpressionTree {
        let limits = self.config.limits();
        let mut child = if rng.random::<f64>() < self.config.crossover_probability {
            let other = &population[second(rng)];
            subtree_crossover(rng, first.tree(), other.tree(), limits)
        } else {
            first.tree().clone()
        };
        if rng.random::<f64>() < self.config.mutation_probability {
            child = mutate(
                rng,
                &child,
                &self.grammar,
                limits,
                &self.config.mutation_weights,
            );
        }
        child
    }
}

pub(crate) fn stats_row(
    generation: usize,
    population: &[Individual],
    average_diversity: f64,
    elapsed: f64,
) -> GenerationStats {
    let f: Vec<f64> = population.iter().map(|i| i.fitness).collect();
    let len = population.iter().map(|i| i.tree().len()).sum::<usize>() as f64;
    GenerationStats {
        generation,
        best_fitness: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        median_fitness: median(&f),
        average_diversity,
        average_length: len / population.len() as f64,
        elapsed,
    }
}

/// Index of the best individual by `score`; ties keep the lowest index.
pub(crate) fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.into_iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}
