//! Chat-model agents: prompt rendering, the HTTP client, reply parsing and
//! the opponent-framing probe.

mod client;
mod parse;
mod policy;
mod probe;
mod prompt;

pub use client::{
    AttemptError, ChatEndpoint, ChatMessage, ChatRequest, Client, ClientConfig, ClientError, Completion, HttpEndpoint,
    MockEndpoint,
};
pub use parse::{parse_choice, ParseError};
pub use policy::{ExternalBinder, ExternalPolicy};
pub use probe::{
    classify_stance, default_question_groups, meta_probe, probe_message, ProbeEntry, ProbeError, ProbeSettings,
    ProbeTranscript, Stance, QUESTION_CONVERGENCE, QUESTION_OPPONENT, QUESTION_OPTIMAL_MOVE, QUESTION_THEORY,
};
pub use prompt::{
    denylist_violation, option_order, parse_history, render_prompt, PromptTemplate, TemplateError,
    DEFAULT_SYSTEM_TEXT,
};
