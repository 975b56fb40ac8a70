use std::sync::Arc;

use log::warn;

use super::client::{Client, ClientError};
use super::parse::parse_choice;
use super::prompt::{render_memory, PromptTemplate};
use crate::engine::{AgentId, ConfigError, ConventionId, NamePool, PolicyBinder, PolicyTag};
use crate::policies::{
    argmax_set, memory_scores, AgentView, Decision, MemoryRule, Policy, PolicyError, PolicyKind, PolicyParams,
};

/// Decision rule backed by a chat model. The engine draw is sent as the
/// request seed.
#[derive(Debug, Clone)]
pub struct ExternalPolicy {
    agent: AgentId,
    client: Arc<Client>,
    template: PromptTemplate,
    /// Extra requests after a reply that names no option.
    parse_retries: u32,
}

impl ExternalPolicy {
    pub fn new(agent: AgentId, client: Arc<Client>, template: PromptTemplate) -> Self {
        ExternalPolicy { agent, client, template, parse_retries: 2 }
    }

    pub fn with_parse_retries(mut self, retries: u32) -> Self {
        self.parse_retries = retries;
        self
    }
}

impl From<ClientError> for PolicyError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Transport { .. } => PolicyError::Transport(e.to_string()),
            ClientError::Provider { .. } => PolicyError::Provider(e.to_string()),
        }
    }
}

impl Policy for ExternalPolicy {
    fn tag(&self) -> PolicyTag {
        PolicyTag::ExternalModel
    }

    fn choose(&self, view: &AgentView<'_>, draw: u64) -> Result<Decision, PolicyError> {
        let prompt = render_memory(self.agent, view.memory, view.pool, &self.template)
            .map_err(|e| PolicyError::Render(e.to_string()))?;
        let mut last_raw = String::new();
        for attempt in 0..=self.parse_retries as u64 {
            let request = self
                .client
                .request(Some(&self.template.system_text), &prompt, Some(draw.wrapping_add(attempt)));
            let reply = self.client.send(&request)?;
            match parse_choice(&reply.text, view.pool) {
                Ok(id) => return Ok(Decision::Name(id)),
                Err(e) => {
                    warn!("agent {}: unparseable reply {:?}", self.agent, e.raw);
                    last_raw = e.raw;
                }
            }
        }
        Err(PolicyError::Parse { raw: last_raw })
    }

    /// Unique argmax of the unweighted memory score, read from the agent's
    /// own history.
    fn settled_choice(&self, view: &AgentView<'_>) -> Option<ConventionId> {
        let rule = MemoryRule::unbiased(view.pool.fixed_len());
        match argmax_set(&memory_scores(view.memory, &rule)).as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }
}

/// Binds external-model agents to a shared client; other kinds get the
/// built-in policies.
#[derive(Debug, Clone)]
pub struct ExternalBinder {
    pub client: Arc<Client>,
    pub template: PromptTemplate,
}

impl PolicyBinder for ExternalBinder {
    fn bind(&self, agent: AgentId, params: &PolicyParams, pool: &NamePool) -> Result<Box<dyn Policy>, ConfigError> {
        match params.kind {
            PolicyKind::ExternalModel => {
                Ok(Box::new(ExternalPolicy::new(agent, self.client.clone(), self.template.clone())))
            }
            _ => params.build(pool),
        }
    }
}
