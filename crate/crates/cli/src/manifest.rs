//! Experiment manifests: which benchmarks, algorithms and grammar to run,
//! how many seeds, and which reference parameters to override.
//!
//! ```json
//! {
//!   "benchmarks": ["nguyen1"],
//!   "algorithms": ["gblgp", "effmut"],
//!   "grammar": "polynomial",
//!   "runs": 30,
//!   "base_seed": 0,
//!   "overrides": { "generations": 50 },
//!   "per_algorithm": { "effmut": { "registers": 10 } },
//!   "output_dir": "results"
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gblgp::benchmarks::Benchmark;
use gblgp::evolution::{Algorithm, AlgorithmConfig};
use gblgp::scfg::{parse_grammar, Grammar};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const DEFAULT_DATASET_SEED_OFFSET: u64 = 1000;

fn default_offset() -> u64 {
    DEFAULT_DATASET_SEED_OFFSET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub benchmarks: Vec<String>,
    pub algorithms: Vec<Algorithm>,
    /// A builtin grammar name or a path relative to the manifest.
    #[serde(default)]
    pub grammar: Option<String>,
    pub runs: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Run `k` draws its data from seed `base_seed + k + dataset_seed_offset`.
    #[serde(default = "default_offset")]
    pub dataset_seed_offset: u64,
    /// Replacements for fields of the reference configuration.
    #[serde(default)]
    pub overrides: Map<String, Value>,
    /// Further replacements keyed by algorithm name, applied last.
    #[serde(default)]
    pub per_algorithm: BTreeMap<String, Map<String, Value>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// One independent run of the plan.
#[derive(Debug, Clone)]
pub struct Job {
    pub benchmark: usize,
    pub config: AlgorithmConfig,
    pub dataset_seed: u64,
}

impl Job {
    pub fn file_name(&self, plan: &Plan) -> String {
        format!("{}_{}_seed{}.json", plan.benchmarks[self.benchmark].name(), self.config.algorithm, self.config.seed)
    }
}

/// A manifest with every name resolved and every configuration validated.
#[derive(Debug, Clone)]
pub struct Plan {
    pub benchmarks: Vec<Benchmark>,
    /// The grammar adapted to each benchmark's input dimension.
    pub grammars: Vec<Option<Grammar>>,
    pub jobs: Vec<Job>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Json { path: path.to_path_buf(), source: e })
    }

    /// Resolves names and paths; relative paths are taken from `base`.
    pub fn resolve(&self, base: &Path) -> Result<Plan, CliError> {
        if self.runs == 0 {
            return Err(CliError::Manifest("runs must be at least 1".into()));
        }
        if self.benchmarks.is_empty() || self.algorithms.is_empty() {
            return Err(CliError::Manifest("at least one benchmark and one algorithm are required".into()));
        }
        for name in self.per_algorithm.keys() {
            if !self.algorithms.iter().any(|a| a.name() == name) {
                return Err(CliError::Manifest(format!("per_algorithm entry `{name}` is not a listed algorithm")));
            }
        }
        let benchmarks =
            self.benchmarks.iter().map(|b| Benchmark::by_name(b)).collect::<Result<Vec<_>, _>>()?;
        let grammar = self.grammar.as_deref().map(|g| resolve_grammar(g, base)).transpose()?;
        if grammar.is_none() {
            if let Some(a) = self.algorithms.iter().find(|a| a.uses_grammar()) {
                return Err(CliError::Manifest(format!("{a} needs a grammar")));
            }
        }
        let grammars = benchmarks
            .iter()
            .map(|b| grammar.as_ref().map(|g| g.with_inputs(b.dimension())).transpose())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Manifest(format!("grammar: {e}")))?;

        let mut configs = Vec::new();
        for &algorithm in &self.algorithms {
            let mut config = apply_overrides(&AlgorithmConfig::new(algorithm), &self.overrides)?;
            if let Some(extra) = self.per_algorithm.get(algorithm.name()) {
                config = apply_overrides(&config, extra)?;
            }
            config.validate()?;
            configs.push(config);
        }

        let mut jobs = Vec::new();
        for benchmark in 0..benchmarks.len() {
            for config in &configs {
                for k in 0..self.runs {
                    let seed = self.base_seed + k;
                    jobs.push(Job {
                        benchmark,
                        config: config.clone().with_seed(seed),
                        dataset_seed: seed + self.dataset_seed_offset,
                    });
                }
            }
        }
        let output_dir = self.output_dir.as_ref().map(|d| base.join(d));
        Ok(Plan { benchmarks, grammars, jobs, output_dir })
    }
}

/// A builtin grammar name (`polynomial`, `extended`) or a DSL file.
pub fn resolve_grammar(spec: &str, base: &Path) -> Result<Grammar, CliError> {
    if let Some(g) = Grammar::builtin(spec) {
        return Ok(g);
    }
    let path = base.join(spec);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    parse_grammar(&text).map_err(|source| CliError::Grammar { path, source })
}

/// Replaces top-level fields of `base`; `mutation` is merged field by
/// field. Unknown fields are rejected, as are `algorithm` and `seed`.
pub fn apply_overrides(base: &AlgorithmConfig, overrides: &Map<String, Value>) -> Result<AlgorithmConfig, CliError> {
    let mut value = serde_json::to_value(base).expect("configs serialize");
    let fields = value.as_object_mut().expect("configs are objects");
    for (key, replacement) in overrides {
        if key == "algorithm" || key == "seed" {
            return Err(CliError::Manifest(format!("`{key}` cannot be overridden")));
        }
        let slot = fields.get_mut(key).ok_or_else(|| CliError::Manifest(format!("unknown parameter `{key}`")))?;
        match (slot, replacement) {
            (Value::Object(current), Value::Object(partial)) => {
                for (k, v) in partial {
                    let inner = current
                        .get_mut(k)
                        .ok_or_else(|| CliError::Manifest(format!("unknown parameter `{key}.{k}`")))?;
                    *inner = v.clone();
                }
            }
            (slot, v) => *slot = v.clone(),
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Manifest(format!("overrides: {e}")))
}
