//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output = "results"
//!
//! [task]
//! kind = "deception"          # or "influence-max"
//!
//! [ea]
//! population = 100
//! generations = 200
//!
//! [transfer]
//! k = 5
//! total = 30
//!
//! [[networks]]
//! name = "karate"
//! path = "karate.edges"
//! budget = 6
//! ```
//!
//! Every section except `networks` is optional. Relative network paths are
//! resolved against the directory of the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::community::GreedyModularity;
use crate::error::{Error, Result};
use crate::evo::{EvoConfig, Problem};
use crate::graph::{load_edge_list, LoadedGraph};
use crate::orchestrator::{LearnConfig, MdeoConfig, TransferConfig};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub name: String,
    pub path: PathBuf,
    /// Edge operations for deception. Ignored for influence maximization.
    #[serde(default)]
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum TaskConfig {
    #[default]
    Deception,
    InfluenceMax {
        #[serde(default = "default_seed_count")]
        seed_count: usize,
        #[serde(default = "default_probability")]
        probability: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_seed_count() -> usize {
    10
}

fn default_probability() -> f64 {
    0.05
}

fn default_samples() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub ea: EvoConfig,
    #[serde(default)]
    pub transfer: TransferConfig,
    #[serde(default)]
    pub learn: LearnConfig,
    pub networks: Vec<NetworkEntry>,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// A configured network after loading.
pub struct LoadedNetwork {
    pub name: String,
    pub loaded: LoadedGraph,
    pub problem: Problem,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config and resolves network paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for n in &mut config.networks {
            if n.path.is_relative() {
                n.path = base.join(&n.path);
            }
        }
        Ok(config)
    }

    /// Checks values and that every network file exists.
    pub fn validate(&self) -> Result<()> {
        self.ea.validate()?;
        if self.transfer.k == 0 {
            return Err(Error::Config("transfer.k must be at least 1".into()));
        }
        if let TaskConfig::InfluenceMax { probability, .. } = self.task {
            if !(0.0..=1.0).contains(&probability) {
                return Err(Error::Config(format!(
                    "task.probability = {probability} is not in [0, 1]"
                )));
            }
        }
        if self.networks.is_empty() {
            return Err(Error::Config("no networks configured".into()));
        }
        for n in &self.networks {
            if !n.path.is_file() {
                return Err(Error::Config(format!(
                    "network `{}`: no file at {}",
                    n.name,
                    n.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn mdeo_config(&self) -> MdeoConfig {
        MdeoConfig {
            evo: self.ea.clone(),
            transfer: self.transfer.clone(),
            learn: self.learn.clone(),
            seed: self.seed,
        }
    }

    /// Loads every network and builds its problem. Deception runs against
    /// greedy modularity.
    pub fn load_networks(&self) -> Result<Vec<LoadedNetwork>> {
        self.validate()?;
        self.networks
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let loaded = load_edge_list(&n.path)?;
                let graph = Arc::new(loaded.graph.clone());
                let problem = match self.task {
                    TaskConfig::Deception => {
                        Problem::deception(graph, n.budget, Arc::new(GreedyModularity))?
                    }
                    TaskConfig::InfluenceMax {
                        seed_count,
                        probability,
                        samples,
                    } => Problem::influence_max(
                        graph,
                        seed_count,
                        probability,
                        samples,
                        rng::derive_seed(self.seed, "ic", &[i as u64]),
                    )?,
                };
                Ok(LoadedNetwork {
                    name: n.name.clone(),
                    loaded,
                    problem,
                })
            })
            .collect()
    }
}
