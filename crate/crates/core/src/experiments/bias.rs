use log::warn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::run_batch;
use crate::engine::{
    AgentState, ConfigError, Dynamics, NamePool, PopulationConfig, SimError,
};
use crate::policies::{AgentView, Decision, PolicyParams};
use crate::stats::{uniformity_test, UniformityMethod};

/// First-choice frequencies of a fresh agent.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasProbe {
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    pub samples: u64,
    pub p_uniform: f64,
    pub method: UniformityMethod,
}

impl BiasProbe {
    pub fn frequency(&self, label: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.counts[i] as f64 / self.samples as f64)
    }
}

/// Draws `samples` first choices from an agent with empty memory and tests
/// them against the uniform distribution over the pool.
pub fn individual_bias_probe(
    params: &PolicyParams,
    pool: &NamePool,
    samples: u64,
    seed: u64,
) -> Result<BiasProbe, ConfigError> {
    if samples < 100 {
        return Err(ConfigError::new("samples", format!("{samples} is below 100")));
    }
    params.validate(pool, Dynamics::MemoryCoordination, "policy")?;
    let policy = params.build(pool)?;
    let agent = AgentState::new(0, 1, params.tag());
    let view = AgentView::of(&agent, pool);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; pool.fixed_len()];
    for _ in 0..samples {
        match policy.choose(&view, rng.next_u64()) {
            Ok(Decision::Name(c)) => counts[c.index()] += 1,
            other => unreachable!("simulated policies choose from the pool: {other:?}"),
        }
    }
    let test = uniformity_test(&counts).expect("samples > 0 and pool >= 2");
    Ok(BiasProbe {
        labels: pool.fixed_labels().to_vec(),
        counts,
        samples,
        p_uniform: test.p_value,
        method: test.method,
    })
}

/// Tally of consensus winners over independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct WinnerHistogram {
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    pub runs: usize,
    /// Runs that hit `max_steps` without consensus; not in `counts`.
    pub non_converged: usize,
    /// Uniformity p-value over converged runs; `None` when none converged.
    pub p_uniform: Option<f64>,
    pub method: Option<UniformityMethod>,
}

impl WinnerHistogram {
    pub fn count(&self, label: &str) -> Option<u64> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.counts[i])
    }

    pub fn converged(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequency(&self, label: &str) -> Option<f64> {
        let converged = self.converged();
        (converged > 0).then(|| self.count(label).unwrap_or(0) as f64 / converged as f64)
    }
}

/// Runs independent seeded simulations and tests whether the winning
/// convention is uniformly distributed over the pool.
pub fn bias_assay(config: &PopulationConfig, runs: usize) -> Result<WinnerHistogram, SimError> {
    let resolved = config.validate()?;
    if config.dynamics != Dynamics::MemoryCoordination {
        return Err(ConfigError::new("dynamics", "bias assay needs a fixed pool").into());
    }
    if runs < 30 {
        warn!("bias assay with {runs} runs; the uniformity test has little power below 30");
    }
    let winners = run_batch(config, runs, |_, traj| traj.winner)?;
    let w = resolved.pool.fixed_len();
    let mut counts = vec![0u64; w];
    let mut non_converged = 0;
    for winner in winners {
        match winner {
            Some(c) => counts[c.index()] += 1,
            None => non_converged += 1,
        }
    }
    let test = uniformity_test(&counts);
    Ok(WinnerHistogram {
        labels: resolved.pool.fixed_labels().to_vec(),
        counts,
        runs,
        non_converged,
        p_uniform: test.map(|t| t.p_value),
        method: test.map(|t| t.method),
    })
}
