//! Simulation laboratory for convention emergence in populations playing
//! pairwise naming and coordination games.
//!
//! * [`engine`] runs a population: pairing, the simultaneous-choice step (or
//!   the speaker/listener minimal naming game) and consensus detection.
//! * [`policies`] holds the agent decision rules.
//! * [`experiments`] turns batches of trajectories into consensus statistics,
//!   collective-bias assays, tipping curves and switch detection.
//! * [`llm_adapter`] drives external chat-completion models as agents and
//!   runs the meta-prompting probe.

pub mod engine;
pub mod experiments;
pub mod llm_adapter;
pub mod policies;
pub mod stats;
