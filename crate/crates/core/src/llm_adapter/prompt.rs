use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::engine::{derive_seed, AgentId, AgentState, Memory, NamePool};

pub const DEFAULT_SYSTEM_TEXT: &str =
    "You are taking part in a game. Read the rules carefully and reply in the requested format.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    #[serde(default = "default_system_text")]
    pub system_text: String,
    /// Most recent records shown; older ones are dropped.
    #[serde(default = "default_render_limit")]
    pub memory_render_limit: usize,
    #[serde(default = "default_payoffs")]
    pub payoffs: (i32, i32),
    /// Mixed with the agent id to order the option labels.
    #[serde(default)]
    pub shuffle_seed: u64,
}

fn default_system_text() -> String {
    DEFAULT_SYSTEM_TEXT.to_string()
}

fn default_render_limit() -> usize {
    5
}

fn default_payoffs() -> (i32, i32) {
    (1, -1)
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            system_text: default_system_text(),
            memory_render_limit: default_render_limit(),
            payoffs: default_payoffs(),
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("prompt contains forbidden term {term:?}")]
    Denylisted { term: String },
    #[error("memory holds {len} records but the template allows {limit}")]
    MemoryTooLong { len: usize, limit: usize },
}

fn denylist() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(?:populations?|other\s+players|community|communities|group|groups|everyone|everybody|majority|minority|frequenc(?:y|ies)|average|percent(?:age)?|proportion|society|crowd|(?:\d+|two|three|four|five|six|seven|eight|nine|ten|many|several|multiple|all)\s+(?:other\s+)?(?:agents|players|participants|people|opponents|partners))\b|%",
        )
        .expect("denylist pattern compiles")
    })
}

/// First forbidden term in `text`, if any.
pub fn denylist_violation(text: &str) -> Option<String> {
    denylist().find(text).map(|m| m.as_str().to_string())
}

/// Renders the prompt seen by `agent`.
pub fn render_prompt(agent: &AgentState, pool: &NamePool, template: &PromptTemplate) -> Result<String, TemplateError> {
    render_memory(agent.id, &agent.memory, pool, template)
}

/// Option labels in the order shown to `agent`.
pub fn option_order(agent: AgentId, pool: &NamePool, template: &PromptTemplate) -> Vec<String> {
    let mut labels = pool.fixed_labels().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(template.shuffle_seed, agent as u64));
    labels.shuffle(&mut rng);
    labels
}

pub(crate) fn render_memory(
    agent: AgentId,
    memory: &Memory,
    pool: &NamePool,
    template: &PromptTemplate,
) -> Result<String, TemplateError> {
    if let Some(term) = denylist_violation(&template.system_text) {
        return Err(TemplateError::Denylisted { term });
    }
    if memory.len() > memory.capacity() {
        return Err(TemplateError::MemoryTooLong { len: memory.len(), limit: memory.capacity() });
    }
    let (win, loss) = template.payoffs;
    let options = option_order(agent, pool, template)
        .iter()
        .map(|l| format!("'{l}'"))
        .collect::<Vec<_>>()
        .join(", ");

    let mut out = String::new();
    writeln!(out, "{}", template.system_text).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "You are Player 1 in a game with Player 2 that lasts for several rounds.").unwrap();
    writeln!(out, "In each round, you and Player 2 each pick one value from these options: {options}.").unwrap();
    writeln!(out, "You both pick at the same time, without seeing the other pick first.").unwrap();
    writeln!(out, "If you pick the same value, you both get a payoff of {win:+}.").unwrap();
    writeln!(out, "If you pick different values, you both get a payoff of {loss:+}.").unwrap();
    writeln!(out, "Your aim is to collect as large a total payoff as you can.").unwrap();

    let shown = memory.len().min(template.memory_render_limit);
    if shown > 0 {
        writeln!(out).unwrap();
        writeln!(out, "Your previous rounds, oldest first:").unwrap();
        for rec in memory.iter().skip(memory.len() - shown) {
            writeln!(
                out,
                "- you picked '{}', Player 2 picked '{}', payoff {:+}",
                pool.label(rec.own_choice),
                pool.label(rec.partner_choice),
                rec.payoff
            )
            .unwrap();
        }
    }
    writeln!(out).unwrap();
    write!(
        out,
        "Which value do you pick this round? Reply only in the form {{'value': <your pick>; 'reason': <one short sentence>}}."
    )
    .unwrap();

    match denylist_violation(&out) {
        Some(term) => Err(TemplateError::Denylisted { term }),
        None => Ok(out),
    }
}

/// Option labels parsed back out of history lines: `(own, partner, payoff)`.
pub fn parse_history(prompt: &str) -> Vec<(String, String, i32)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?m)^- you picked '([^']*)', Player 2 picked '([^']*)', payoff ([+-]\d+)$").unwrap()
    });
    re.captures_iter(prompt)
        .map(|c| (c[1].to_string(), c[2].to_string(), c[3].parse().unwrap_or(0)))
        .collect()
}
