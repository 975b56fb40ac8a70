//! Population state, pairing, the interaction step and the run loop.

mod agent;
mod config;
mod names;
mod seed;
mod state;
mod trajectory;

pub use agent::{AgentId, AgentState, InteractionRecord, Inventory, Memory, PolicyTag};
pub use config::{
    content_hash, Commitment, ConfigError, Dynamics, Horizon, Init, Pairing, PolicyRange, PoolSpec,
    PopulationConfig, ResolvedConfig,
};
pub use names::{default_labels, ConventionId, NamePool, PoolError};
pub use seed::derive_seed;
pub use state::{
    consensus_of, init_population, init_population_with, is_consensus, run_simulation,
    run_to_completion, BuiltinPolicies, InteractionOutcome, PolicyBinder, SimError,
    SimulationState, StepError,
};
pub use trajectory::{StepRecord, Trajectory};
