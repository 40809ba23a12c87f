//! Experiment configuration.
//!
//! Values are layered: the profile supplies defaults, the TOML file
//! overrides any key it sets, and command-line flags override both.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hashgp::evolve::{Algorithm, AlgorithmConfig};
use hashgp::hash::HashMode;
use hashgp::problems::{self, GeneratorSpec, ProblemSpec, Split};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(format!("unknown profile `{s}` (expected desk or paper)")),
        }
    }
}

impl Profile {
    fn base(self) -> ExperimentFile {
        let mut file = ExperimentFile::default();
        if self == Profile::Paper {
            file.algorithm.population_size = 1000;
            file.algorithm.generations = 500;
            file.experiment.repetitions = 50;
        }
        file
    }
}

/// Where a run's data comes from, as written in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Bundled or registry problem name.
    pub name: String,
    /// Alternative registry file to look `name` up in.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    /// External CSV instead of a generated problem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub train_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
    /// Seed for synthetic data, shared by all repetitions.
    pub seed: u64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            name: "Poly-10".into(),
            registry: None,
            csv: None,
            target: None,
            train_fraction: 0.7,
            shuffle_seed: None,
            seed: 0,
        }
    }
}

impl ProblemSection {
    /// Resolves relative paths against `base`.
    pub fn resolve(&self, base: &Path) -> Result<ProblemSpec, CliError> {
        if let Some(csv) = &self.csv {
            let target = self
                .target
                .clone()
                .ok_or_else(|| CliError::usage("problem.csv needs problem.target"))?;
            return Ok(ProblemSpec::Csv {
                name: self.name.clone(),
                path: base.join(csv),
                target,
                split: Split {
                    train_fraction: self.train_fraction,
                    shuffle_seed: self.shuffle_seed,
                },
            });
        }
        let spec: GeneratorSpec = match &self.registry {
            Some(path) => {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::usage(format!("cannot read registry {}: {e}", path.display()))
                })?;
                problems::parse_registry(&text)
                    .map_err(CliError::usage)?
                    .into_iter()
                    .find(|p| p.name.eq_ignore_ascii_case(&self.name))
                    .ok_or_else(|| {
                        CliError::usage(format!("problem `{}` not in {}", self.name, path.display()))
                    })?
            }
            None => problems::find(&self.name)
                .cloned()
                .ok_or_else(|| CliError::usage(format!("unknown problem `{}`", self.name)))?,
        };
        Ok(ProblemSpec::Generated(spec))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub repetitions: usize,
    pub output: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            repetitions: 10,
            output: PathBuf::from("results"),
        }
    }
}

/// The on-disk layout of a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentFile {
    pub experiment: ExperimentSection,
    pub problem: ProblemSection,
    pub algorithm: AlgorithmConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub mode: Option<HashMode>,
    pub algorithm: Option<Algorithm>,
    pub out: Option<PathBuf>,
    pub repetitions: Option<usize>,
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmConfig,
    pub problem: ProblemSpec,
    pub data_seed: u64,
    pub repetitions: usize,
    pub output: PathBuf,
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// Builds the configuration from optional file text. Relative paths in
    /// the file resolve against `base_dir`.
    pub fn from_text(
        text: Option<&str>,
        base_dir: &Path,
        overrides: &Overrides,
    ) -> Result<Self, CliError> {
        let base = overrides.profile.unwrap_or_default().base();
        let mut value = toml::Value::try_from(&base).expect("defaults serialize");
        if let Some(text) = text {
            let top: toml::Value = toml::from_str(text).map_err(CliError::usage)?;
            merge(&mut value, top);
        }
        let file: ExperimentFile = value.try_into().map_err(CliError::usage)?;
        let mut algorithm = file.algorithm;
        if let Some(seed) = overrides.seed {
            algorithm.seed = seed;
        }
        if let Some(mode) = overrides.mode {
            algorithm.hash_mode = mode;
        }
        if let Some(alg) = overrides.algorithm {
            algorithm.algorithm = alg;
        }
        algorithm.validate().map_err(CliError::usage)?;
        let repetitions = overrides.repetitions.unwrap_or(file.experiment.repetitions);
        if repetitions == 0 {
            return Err(CliError::usage("repetitions must be at least 1"));
        }
        let output = match &overrides.out {
            Some(out) => out.clone(),
            None => base_dir.join(&file.experiment.output),
        };
        Ok(ExperimentConfig {
            algorithm,
            problem: file.problem.resolve(base_dir)?,
            data_seed: file.problem.seed,
            repetitions,
            output,
        })
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                let dir = p.parent().unwrap_or(Path::new("."));
                Self::from_text(Some(&text), dir, overrides)
            }
            None => Self::from_text(None, Path::new("."), overrides),
        }
    }
}
