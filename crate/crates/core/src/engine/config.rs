use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::names::{default_labels, ConventionId, NamePool};
use crate::policies::{PolicyKind, PolicyParams};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration field `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Independent uniformly random pair every step.
    #[default]
    PerStepRandomPair,
    /// A fresh uniformly random perfect matching every N/2 steps.
    PerRoundPerfectMatching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    /// Speaker/listener naming game with invention and inventory collapse.
    MinimalNg,
    /// Simultaneous choice from a fixed pool, scored from bounded memory.
    #[default]
    MemoryCoordination,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    #[default]
    EmptyInventory,
    SeededConsensus(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    /// Stop once consensus has been confirmed for a full sweep.
    #[default]
    UntilConsensus,
    /// Always run to `max_steps`; used when looking for consensus changes.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolSpec {
    Size(usize),
    Labels(Vec<String>),
}

impl PoolSpec {
    pub fn labels(&self) -> Vec<String> {
        match self {
            PoolSpec::Size(w) => default_labels(*w),
            PoolSpec::Labels(labels) => labels.clone(),
        }
    }
}

impl Default for PoolSpec {
    fn default() -> Self {
        PoolSpec::Size(2)
    }
}

/// Policy override for agents `from..to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRange {
    pub from: usize,
    pub to: usize,
    pub policy: PolicyParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Commitment {
    pub agent: usize,
    pub target: String,
}

fn default_memory() -> usize {
    5
}

fn default_payoff_success() -> i32 {
    1
}

fn default_payoff_failure() -> i32 {
    -1
}

/// Hex of the first 8 bytes of the SHA-256 digest of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Full parameterization of one population run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub n: usize,
    #[serde(default)]
    pub pool: PoolSpec,
    #[serde(default = "default_memory")]
    pub memory: usize,
    #[serde(default = "default_payoff_success")]
    pub payoff_success: i32,
    #[serde(default = "default_payoff_failure")]
    pub payoff_failure: i32,
    #[serde(default)]
    pub pairing: Pairing,
    #[serde(default)]
    pub dynamics: Dynamics,
    /// Policy for every agent not covered by `policy_mix` or `committed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyParams>,
    #[serde(default)]
    pub policy_mix: Vec<PolicyRange>,
    #[serde(default)]
    pub committed: Vec<Commitment>,
    #[serde(default)]
    pub init: Init,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationConfig {
    pub fn minimal_ng(n: usize) -> Self {
        PopulationConfig {
            dynamics: Dynamics::MinimalNg,
            ..PopulationConfig::new(n)
        }
    }

    pub fn memory_coordination(n: usize, pool_size: usize) -> Self {
        PopulationConfig {
            pool: PoolSpec::Size(pool_size),
            ..PopulationConfig::new(n)
        }
    }

    fn new(n: usize) -> Self {
        PopulationConfig {
            n,
            pool: PoolSpec::default(),
            memory: default_memory(),
            payoff_success: default_payoff_success(),
            payoff_failure: default_payoff_failure(),
            pairing: Pairing::default(),
            dynamics: Dynamics::default(),
            policy: None,
            policy_mix: Vec::new(),
            committed: Vec::new(),
            init: Init::default(),
            max_steps: None,
            horizon: Horizon::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn default_policy(&self) -> PolicyParams {
        match self.dynamics {
            Dynamics::MinimalNg => PolicyParams::minimal_ng(),
            Dynamics::MemoryCoordination => PolicyParams::memory(),
        }
    }

    pub fn effective_max_steps(&self) -> u64 {
        self.max_steps
            .unwrap_or_else(|| 200 * (self.n as u64) * (self.n as u64))
    }

    /// Same config with every default written out explicitly.
    pub fn materialized(&self) -> PopulationConfig {
        let mut out = self.clone();
        out.pool = PoolSpec::Labels(self.pool.labels());
        out.policy = Some(self.policy.clone().unwrap_or_else(|| self.default_policy()));
        out.max_steps = Some(self.effective_max_steps());
        out
    }

    /// Hex SHA-256 prefix of the materialized config, excluding the seed.
    pub fn config_hash(&self) -> String {
        let mut m = self.materialized();
        m.seed = 0;
        content_hash(&serde_json::to_vec(&m).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<ResolvedConfig, ConfigError> {
        ResolvedConfig::resolve(self)
    }
}

/// A validated config with labels interned and per-agent policies assigned.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: PopulationConfig,
    pub pool: NamePool,
    pub policies: Vec<PolicyParams>,
    pub committed: Vec<Option<ConventionId>>,
    pub seeded: Option<ConventionId>,
    pub max_steps: u64,
    pub config_hash: String,
}

impl ResolvedConfig {
    fn resolve(config: &PopulationConfig) -> Result<Self, ConfigError> {
        let n = config.n;
        if n < 2 {
            return Err(ConfigError::new("n", format!("population size {n} is below 2")));
        }
        let pool = NamePool::new(config.pool.labels())
            .map_err(|e| ConfigError::new("pool", e.to_string()))?;
        if pool.len() < 2 {
            return Err(ConfigError::new(
                "pool",
                format!("pool size {} is below 2", pool.len()),
            ));
        }
        if config.memory < 1 {
            return Err(ConfigError::new("memory", "memory capacity must be at least 1"));
        }
        if config.payoff_success <= config.payoff_failure {
            return Err(ConfigError::new(
                "payoff_success",
                "success payoff must exceed failure payoff",
            ));
        }
        if config.pairing == Pairing::PerRoundPerfectMatching && !n.is_multiple_of(2) {
            return Err(ConfigError::new(
                "pairing",
                format!("per-round perfect matching needs an even population, got {n}"),
            ));
        }
        let max_steps = config.effective_max_steps();
        if max_steps == 0 {
            return Err(ConfigError::new("max_steps", "must be positive"));
        }

        let base = config.policy.clone().unwrap_or_else(|| config.default_policy());
        base.validate(&pool, config.dynamics, "policy")?;
        let mut policies = vec![base; n];
        for (i, range) in config.policy_mix.iter().enumerate() {
            let field = format!("policy_mix[{i}]");
            if range.from >= range.to || range.to > n {
                return Err(ConfigError::new(
                    field,
                    format!("range {}..{} is empty or outside 0..{n}", range.from, range.to),
                ));
            }
            range.policy.validate(&pool, config.dynamics, &field)?;
            for slot in &mut policies[range.from..range.to] {
                *slot = range.policy.clone();
            }
        }

        let mut committed = vec![None; n];
        for (i, policy) in policies.iter().enumerate() {
            if let PolicyKind::Committed = policy.kind {
                committed[i] = policy.target.as_deref().and_then(|t| pool.id(t));
            }
        }
        for c in &config.committed {
            if c.agent >= n {
                return Err(ConfigError::new(
                    "committed.agent",
                    format!("agent {} outside 0..{n}", c.agent),
                ));
            }
            let target = pool.id(&c.target).filter(|id| id.index() < pool.fixed_len());
            let Some(target) = target else {
                return Err(ConfigError::new(
                    "committed.target",
                    format!("{:?} is not in the pool", c.target),
                ));
            };
            if config.committed.iter().filter(|o| o.agent == c.agent).count() > 1 {
                return Err(ConfigError::new(
                    "committed.agent",
                    format!("agent {} committed twice", c.agent),
                ));
            }
            committed[c.agent] = Some(target);
            policies[c.agent] = PolicyParams::committed(c.target.clone());
        }

        let seeded = match &config.init {
            Init::EmptyInventory => None,
            Init::SeededConsensus(label) => Some(pool.id(label).ok_or_else(|| {
                ConfigError::new("init", format!("seeded name {label:?} is not in the pool"))
            })?),
        };

        Ok(ResolvedConfig {
            config: config.clone(),
            pool,
            policies,
            committed,
            seeded,
            max_steps,
            config_hash: config.config_hash(),
        })
    }
}
