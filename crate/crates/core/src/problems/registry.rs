use std::path::PathBuf;
use std::sync::OnceLock;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{evaluate, parse_infix, EvalError, ParseError};

use super::{DataError, Dataset, Split};

const BUILTIN: &str = include_str!("../../data/problems.toml");

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("problem `{name}`: bad formula: {source}")]
    Formula {
        name: String,
        #[source]
        source: ParseError,
    },
    #[error("problem `{name}`: {source}")]
    Eval {
        name: String,
        #[source]
        source: EvalError,
    },
    #[error("problem `{name}`: {message}")]
    Invalid { name: String, message: String },
    #[error("problem `{name}`: generated data is not finite: {source}")]
    NonFinite {
        name: String,
        #[source]
        source: DataError,
    },
    #[error("registry: {0}")]
    Registry(#[from] toml::de::Error),
    #[error("{0}")]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Uniform,
    Grid,
    Choice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub mode: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl VariableSpec {
    fn grid_points(&self) -> Vec<f64> {
        let [lo, hi] = self.range.expect("checked");
        let step = self.step.expect("checked");
        // Tolerance absorbs representation error in (hi - lo) / step.
        let count = ((hi - lo) / step + 1e-6).floor() as usize + 1;
        (0..count).map(|k| lo + k as f64 * step).collect()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.mode {
            Sampling::Uniform => {
                let [lo, hi] = self.range.expect("checked");
                rng.random_range(lo..hi)
            }
            Sampling::Choice => {
                let values = self.values.as_ref().expect("checked");
                values[rng.random_range(0..values.len())]
            }
            Sampling::Grid => unreachable!("grid partitions are enumerated"),
        }
    }

    fn check(&self) -> Result<(), String> {
        let range_ok = |r: Option<[f64; 2]>| match r {
            Some([lo, hi]) if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            _ => Err(format!("variable `{}` needs a finite range with lo < hi", self.name)),
        };
        match self.mode {
            Sampling::Uniform => range_ok(self.range),
            Sampling::Grid => {
                range_ok(self.range)?;
                match self.step {
                    Some(s) if s.is_finite() && s > 0.0 => Ok(()),
                    _ => Err(format!("grid variable `{}` needs a positive step", self.name)),
                }
            }
            Sampling::Choice => match &self.values {
                Some(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(()),
                _ => Err(format!("choice variable `{}` needs finite values", self.name)),
            },
        }
    }
}

/// Sampling plan for one block of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub rows: usize,
    pub variables: Vec<VariableSpec>,
}

impl Partition {
    fn is_grid(&self) -> bool {
        self.variables.iter().any(|v| v.mode == Sampling::Grid)
    }

    fn check(&self) -> Result<(), String> {
        for v in &self.variables {
            v.check()?;
        }
        if self.is_grid() {
            if self.variables.iter().any(|v| v.mode != Sampling::Grid) {
                return Err("grid and random sampling cannot be mixed in one partition".into());
            }
            let product: usize = self.variables.iter().map(|v| v.grid_points().len()).product();
            if product != self.rows {
                return Err(format!("grid has {product} points but rows = {}", self.rows));
            }
        }
        Ok(())
    }

    /// Input matrix, one column per variable.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array2<f64> {
        let k = self.variables.len();
        let mut x = Array2::zeros((self.rows, k));
        if self.is_grid() {
            let grids: Vec<Vec<f64>> = self.variables.iter().map(|v| v.grid_points()).collect();
            // First variable varies slowest.
            for r in 0..self.rows {
                let mut rest = r;
                for c in (0..k).rev() {
                    let g = &grids[c];
                    x[[r, c]] = g[rest % g.len()];
                    rest /= g.len();
                }
            }
        } else {
            for r in 0..self.rows {
                for (c, v) in self.variables.iter().enumerate() {
                    x[[r, c]] = v.sample(rng);
                }
            }
        }
        x
    }
}

fn default_target() -> String {
    "target".into()
}

/// A synthetic benchmark: formula plus sampling plan for each partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<String>,
    pub formula: String,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub noise_sigma: f64,
    pub train: Partition,
    pub test: Partition,
}

impl GeneratorSpec {
    pub fn variable_names(&self) -> Vec<&str> {
        self.train.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn check(&self) -> Result<(), GenerateError> {
        let invalid = |message: String| GenerateError::Invalid {
            name: self.name.clone(),
            message,
        };
        self.train.check().map_err(|m| invalid(format!("train: {m}")))?;
        self.test.check().map_err(|m| invalid(format!("test: {m}")))?;
        let names = self.variable_names();
        let test_names: Vec<&str> = self.test.variables.iter().map(|v| v.name.as_str()).collect();
        if names != test_names {
            return Err(invalid("train and test must list the same variables".into()));
        }
        if names.contains(&self.target.as_str()) {
            return Err(invalid(format!("target `{}` clashes with an input", self.target)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid(format!("bad noise sigma {}", self.noise_sigma)));
        }
        Ok(())
    }

    fn block<R: Rng + ?Sized>(
        &self,
        partition: &Partition,
        rng: &mut R,
    ) -> Result<Dataset, GenerateError> {
        let tree = parse_infix(&self.formula, &self.variable_names()).map_err(|source| {
            GenerateError::Formula {
                name: self.name.clone(),
                source,
            }
        })?;
        let x = partition.sample(rng);
        let mut y = evaluate(&tree, x.view()).map_err(|source| GenerateError::Eval {
            name: self.name.clone(),
            source,
        })?;
        if self.noise_sigma > 0.0 {
            let noise = Normal::new(0.0, self.noise_sigma).expect("checked sigma");
            for v in &mut y {
                *v += noise.sample(rng);
            }
        }
        let mut data = x;
        data.push_column(ndarray::ArrayView1::from(&y))
            .expect("row count matches");
        let mut columns: Vec<String> = self.variable_names().iter().map(|s| s.to_string()).collect();
        columns.push(self.target.clone());
        let d = Dataset::new(columns, data, &self.target)?;
        d.check_finite().map_err(|source| GenerateError::NonFinite {
            name: self.name.clone(),
            source,
        })?;
        Ok(d)
    }
}

/// Where a run's data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Generated(GeneratorSpec),
    Csv {
        name: String,
        path: PathBuf,
        target: String,
        split: Split,
    },
}

impl ProblemSpec {
    pub fn name(&self) -> &str {
        match self {
            ProblemSpec::Generated(g) => &g.name,
            ProblemSpec::Csv { name, .. } => name,
        }
    }

    /// Materializes (train, test). The rng is only drawn from for generated
    /// problems.
    pub fn load<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Dataset, Dataset), GenerateError> {
        match self {
            ProblemSpec::Generated(g) => generate(g, rng),
            ProblemSpec::Csv {
                path, target, split, ..
            } => Ok(super::load_csv(path, target, *split)?),
        }
    }
}

/// Samples the training block, then the test block, from one rng stream.
pub fn generate<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    rng: &mut R,
) -> Result<(Dataset, Dataset), GenerateError> {
    spec.check()?;
    let train = spec.block(&spec.train, rng)?;
    let test = spec.block(&spec.test, rng)?;
    Ok((train, test))
}

#[derive(Deserialize)]
struct RegistryFile {
    problem: Vec<GeneratorSpec>,
}

/// Parses a registry file of `[[problem]]` records.
pub fn parse_registry(text: &str) -> Result<Vec<GeneratorSpec>, GenerateError> {
    let file: RegistryFile = toml::from_str(text)?;
    for p in &file.problem {
        p.check()?;
    }
    Ok(file.problem)
}

/// The bundled benchmark definitions.
pub fn builtin() -> &'static [GeneratorSpec] {
    static REGISTRY: OnceLock<Vec<GeneratorSpec>> = OnceLock::new();
    REGISTRY.get_or_init(|| parse_registry(BUILTIN).expect("bundled registry is valid"))
}

/// Bundled problem by name, ignoring ASCII case.
pub fn find(name: &str) -> Option<&'static GeneratorSpec> {
    builtin().iter().find(|p| p.name.eq_ignore_ascii_case(name))
}
