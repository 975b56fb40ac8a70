//! Agent decision rules and the per-dynamics update rules.
//!
//! A policy only ever sees an [`AgentView`]: its own inventory, its own
//! bounded memory and the name pool. Randomness reaches a policy as a single
//! 64-bit draw taken from the engine stream, so every decision is a pure
//! function of `(view, params, draw)`.

mod memory;
mod minimal;

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{
    AgentState, ConfigError, ConventionId, Dynamics, Inventory, Memory, NamePool, PolicyTag,
};

pub use memory::{argmax_set, memory_choose, memory_scores, memory_update, MemoryRule};
pub use minimal::{minimal_ng_choose, minimal_ng_decide, minimal_ng_update};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    MinimalNg,
    MemoryCoordination,
    Committed,
    ExternalModel,
}

fn default_kappa() -> f64 {
    1.0
}

/// Declarative policy parameters as they appear in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub kind: PolicyKind,
    /// Commitment target label; required for `committed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub temperature: f64,
    /// Weight on names the partner was seen playing.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Prior score per label; missing labels get 0.
    #[serde(default)]
    pub pseudo_counts: BTreeMap<String, f64>,
}

impl PolicyParams {
    fn with_kind(kind: PolicyKind) -> Self {
        PolicyParams {
            kind,
            target: None,
            epsilon: 0.0,
            temperature: 0.0,
            kappa: default_kappa(),
            pseudo_counts: BTreeMap::new(),
        }
    }

    pub fn minimal_ng() -> Self {
        Self::with_kind(PolicyKind::MinimalNg)
    }

    pub fn memory() -> Self {
        Self::with_kind(PolicyKind::MemoryCoordination)
    }

    pub fn external() -> Self {
        Self::with_kind(PolicyKind::ExternalModel)
    }

    pub fn committed(target: impl Into<String>) -> Self {
        PolicyParams {
            target: Some(target.into()),
            ..Self::with_kind(PolicyKind::Committed)
        }
    }

    pub fn with_pseudo_count(mut self, label: impl Into<String>, value: f64) -> Self {
        self.pseudo_counts.insert(label.into(), value);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn tag(&self) -> PolicyTag {
        match self.kind {
            PolicyKind::MinimalNg => PolicyTag::MinimalNg,
            PolicyKind::MemoryCoordination => PolicyTag::MemoryCoordination,
            PolicyKind::Committed => PolicyTag::Committed,
            PolicyKind::ExternalModel => PolicyTag::ExternalModel,
        }
    }

    pub fn validate(
        &self,
        pool: &NamePool,
        dynamics: Dynamics,
        field: &str,
    ) -> Result<(), ConfigError> {
        let err = |sub: &str, reason: String| ConfigError::new(format!("{field}.{sub}"), reason);
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(err("epsilon", format!("{} is outside [0, 1]", self.epsilon)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(err("temperature", format!("{} must be finite and >= 0", self.temperature)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(err("kappa", format!("{} must be finite and >= 0", self.kappa)));
        }
        for (label, value) in &self.pseudo_counts {
            if pool.id(label).is_none() {
                return Err(err("pseudo_counts", format!("{label:?} is not in the pool")));
            }
            if !(*value >= 0.0 && value.is_finite()) {
                return Err(err("pseudo_counts", format!("{label:?} has negative weight {value}")));
            }
        }
        match self.kind {
            PolicyKind::Committed => match &self.target {
                Some(t) if pool.id(t).is_some() => {}
                Some(t) => return Err(err("target", format!("{t:?} is not in the pool"))),
                None => return Err(err("target", "committed policy needs a target".into())),
            },
            PolicyKind::MinimalNg if dynamics != Dynamics::MinimalNg => {
                return Err(err("kind", "minimal-ng policy needs minimal-ng dynamics".into()))
            }
            PolicyKind::MemoryCoordination | PolicyKind::ExternalModel
                if dynamics != Dynamics::MemoryCoordination =>
            {
                return Err(err("kind", "policy needs memory-coordination dynamics".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// Builds the decision rule for agents with these parameters. External
    /// model policies are bound by the caller and are rejected here.
    pub fn build(&self, pool: &NamePool) -> Result<Box<dyn Policy>, ConfigError> {
        Ok(match self.kind {
            PolicyKind::MinimalNg => Box::new(MinimalNgPolicy),
            PolicyKind::MemoryCoordination => Box::new(MemoryPolicy::new(MemoryRule::from_params(self, pool))),
            PolicyKind::Committed => {
                let target = self
                    .target
                    .as_deref()
                    .and_then(|t| pool.id(t))
                    .ok_or_else(|| ConfigError::new("policy.target", "unknown target"))?;
                Box::new(CommittedPolicy { target })
            }
            PolicyKind::ExternalModel => {
                return Err(ConfigError::new(
                    "policy.kind",
                    "external-model agents need an endpoint binding",
                ))
            }
        })
    }
}

/// The only information a policy receives.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub inventory: &'a Inventory,
    pub memory: &'a Memory,
    pub pool: &'a NamePool,
}

impl<'a> AgentView<'a> {
    pub fn of(agent: &'a AgentState, pool: &'a NamePool) -> Self {
        AgentView {
            inventory: &agent.inventory,
            memory: &agent.memory,
            pool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Name(ConventionId),
    /// Create a fresh name (minimal naming game speaker with empty inventory).
    Invent,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("could not extract a choice from response {raw:?}")]
    Parse { raw: String },
    #[error("rendering failed: {0}")]
    Render(String),
}

pub trait Policy: Send + Sync + fmt::Debug {
    fn tag(&self) -> PolicyTag;

    fn choose(&self, view: &AgentView<'_>, draw: u64) -> Result<Decision, PolicyError>;

    /// Deterministic-mode choice: the argmax with ties reported as `None`.
    fn settled_choice(&self, view: &AgentView<'_>) -> Option<ConventionId>;

    fn committed_to(&self) -> Option<ConventionId> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MinimalNgPolicy;

impl Policy for MinimalNgPolicy {
    fn tag(&self) -> PolicyTag {
        PolicyTag::MinimalNg
    }

    fn choose(&self, view: &AgentView<'_>, draw: u64) -> Result<Decision, PolicyError> {
        Ok(minimal_ng_decide(view.inventory, draw))
    }

    fn settled_choice(&self, view: &AgentView<'_>) -> Option<ConventionId> {
        view.inventory.single()
    }
}

#[derive(Debug, Clone)]
pub struct MemoryPolicy {
    rule: MemoryRule,
}

impl MemoryPolicy {
    pub fn new(rule: MemoryRule) -> Self {
        MemoryPolicy { rule }
    }

    pub fn rule(&self) -> &MemoryRule {
        &self.rule
    }
}

impl Policy for MemoryPolicy {
    fn tag(&self) -> PolicyTag {
        PolicyTag::MemoryCoordination
    }

    fn choose(&self, view: &AgentView<'_>, draw: u64) -> Result<Decision, PolicyError> {
        Ok(Decision::Name(memory_choose(view.memory, &self.rule, draw)))
    }

    fn settled_choice(&self, view: &AgentView<'_>) -> Option<ConventionId> {
        match argmax_set(&memory_scores(view.memory, &self.rule)).as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CommittedPolicy {
    pub target: ConventionId,
}

impl Policy for CommittedPolicy {
    fn tag(&self) -> PolicyTag {
        PolicyTag::Committed
    }

    fn choose(&self, _view: &AgentView<'_>, _draw: u64) -> Result<Decision, PolicyError> {
        Ok(Decision::Name(self.target))
    }

    fn settled_choice(&self, _view: &AgentView<'_>) -> Option<ConventionId> {
        Some(self.target)
    }

    fn committed_to(&self) -> Option<ConventionId> {
        Some(self.target)
    }
}

/// Returns the agent's commitment target. Memory keeps accruing elsewhere but
/// never feeds into this choice.
pub fn committed_choose(agent: &AgentState) -> Option<ConventionId> {
    agent.committed_to
}

/// Private generator for one decision, derived from the engine draw.
pub(crate) fn decision_rng(draw: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(draw)
}

/// Maps a uniform 64-bit draw onto `0..len` by multiply-shift.
pub(crate) fn uniform_index(draw: u64, len: usize) -> usize {
    ((draw as u128 * len as u128) >> 64) as usize
}
