use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use convention_lab::engine::{content_hash, PopulationConfig};
use convention_lab::experiments::DEFAULT_THETA;
use convention_lab::llm_adapter::{default_question_groups, ClientConfig, ProbeSettings, PromptTemplate};

use crate::error::CliError;

/// Parameters of the assays, all optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// First-choice draws for `probe-individual`.
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default = "default_challenger")]
    pub challenger: String,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_theta")]
    pub theta: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
}

fn default_runs() -> usize {
    100
}

fn default_samples() -> u64 {
    10_000
}

fn default_p_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.05).collect()
}

fn default_challenger() -> String {
    "B".into()
}

fn default_n_list() -> Vec<usize> {
    vec![50, 100, 200, 400]
}

fn default_theta() -> usize {
    DEFAULT_THETA
}

fn default_bootstrap() -> usize {
    200
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("all experiment fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_question_groups")]
    pub question_groups: Vec<Vec<String>>,
    /// Answer every request with this text instead of calling the endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_reply: Option<String>,
}

fn default_repetitions() -> usize {
    ProbeSettings::default().repetitions
}

impl ProbeSection {
    pub fn settings(&self) -> ProbeSettings {
        ProbeSettings { repetitions: self.repetitions, question_groups: self.question_groups.clone() }
    }
}

impl Default for ProbeSection {
    fn default() -> Self {
        toml::from_str("").expect("all probe fields have defaults")
    }
}

/// The whole config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub population: PopulationConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<ClientConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
    #[serde(default)]
    pub template: PromptTemplate,
    /// Output directory, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Config with defaults filled in, as echoed to `effective_config.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub population: PopulationConfig,
    pub experiment: ExperimentSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<ClientConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
    pub template: PromptTemplate,
}

impl Effective {
    pub fn new(command: &str, file: &ConfigFile, seed: u64) -> Self {
        let mut population = file.population.materialized();
        population.seed = seed;
        let mut eff = Effective {
            config_hash: String::new(),
            seed,
            command: command.to_string(),
            population,
            experiment: file.experiment.clone(),
            endpoint: file.endpoint.clone(),
            probe: file.probe.clone(),
            template: file.template.clone(),
        };
        eff.config_hash = eff.hash();
        eff
    }

    /// Hash of everything except the seed.
    fn hash(&self) -> String {
        let mut unseeded = self.clone();
        unseeded.seed = 0;
        unseeded.population.seed = 0;
        content_hash(&serde_json::to_vec(&unseeded).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let file: ConfigFile = toml::from_str("[population]\nn = 10\n").unwrap();
        assert_eq!(file.experiment.runs, 100);
        assert_eq!(file.experiment.p_grid.len(), 11);
        assert_eq!(file.template, PromptTemplate::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ConfigFile>("[population]\nn = 10\nbogus = 1\n").is_err());
        assert!(toml::from_str::<ConfigFile>("[population]\nn = 10\n[experiment]\nrunz = 3\n").is_err());
        assert!(toml::from_str::<ConfigFile>("[population]\nn = 10\n[probe]\nrepetitions = 2\nextra = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_seed_only() {
        let file: ConfigFile = toml::from_str("[population]\nn = 10\n").unwrap();
        let a = Effective::new("simulate", &file, 1);
        let b = Effective::new("simulate", &file, 2);
        assert_eq!(a.config_hash, b.config_hash);
        let mut other = file.clone();
        other.experiment.runs = 7;
        assert_ne!(Effective::new("simulate", &other, 1).config_hash, a.config_hash);
    }
}
