use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{AgentId, AgentState, InteractionRecord, Inventory};
use super::config::{ConfigError, Dynamics, Horizon, Pairing, PopulationConfig, ResolvedConfig};
use super::names::{ConventionId, NamePool};
use super::trajectory::{StepRecord, Trajectory};
use crate::policies::{memory_update, minimal_ng_update, AgentView, Decision, Policy, PolicyError, PolicyParams};

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("step budget of {max_steps} exhausted")]
    Exhausted { max_steps: u64 },
    #[error("agent {agent} failed to choose: {source}")]
    Policy {
        agent: AgentId,
        #[source]
        source: PolicyError,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Result of one interaction step.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionOutcome {
    pub record: StepRecord,
    /// Records delivered to agents `a` and `b` (memory-coordination only).
    pub delivered: Option<(InteractionRecord, InteractionRecord)>,
}

/// Supplies the decision rule for each agent. The default binder builds the
/// built-in simulated policies; external-model agents need a custom one.
pub trait PolicyBinder {
    fn bind(
        &self,
        agent: AgentId,
        params: &PolicyParams,
        pool: &NamePool,
    ) -> Result<Box<dyn Policy>, ConfigError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinPolicies;

impl PolicyBinder for BuiltinPolicies {
    fn bind(
        &self,
        _agent: AgentId,
        params: &PolicyParams,
        pool: &NamePool,
    ) -> Result<Box<dyn Policy>, ConfigError> {
        params.build(pool)
    }
}

impl<F> PolicyBinder for F
where
    F: Fn(AgentId, &PolicyParams, &NamePool) -> Result<Box<dyn Policy>, ConfigError>,
{
    fn bind(
        &self,
        agent: AgentId,
        params: &PolicyParams,
        pool: &NamePool,
    ) -> Result<Box<dyn Policy>, ConfigError> {
        self(agent, params, pool)
    }
}

pub struct SimulationState {
    resolved: ResolvedConfig,
    pool: NamePool,
    agents: Vec<AgentState>,
    policies: Vec<Box<dyn Policy>>,
    rng: ChaCha8Rng,
    step: u64,
    round: Vec<(AgentId, AgentId)>,
    /// Number of agents holding each name in their inventory.
    holders: Vec<u32>,
    distinct: u32,
    settled: Vec<Option<ConventionId>>,
    settled_counts: Vec<u32>,
    trajectory: Trajectory,
}

impl std::fmt::Debug for SimulationState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulationState")
            .field("n", &self.agents.len())
            .field("step", &self.step)
            .field("distinct", &self.distinct)
            .finish_non_exhaustive()
    }
}

pub fn init_population(config: &PopulationConfig) -> Result<SimulationState, ConfigError> {
    init_population_with(config, &BuiltinPolicies)
}

pub fn init_population_with(
    config: &PopulationConfig,
    binder: &dyn PolicyBinder,
) -> Result<SimulationState, ConfigError> {
    let resolved = config.validate()?;
    let n = config.n;
    let pool = resolved.pool.clone();
    let payoffs = (config.payoff_success, config.payoff_failure);

    let mut policies = Vec::with_capacity(n);
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let params = &resolved.policies[i];
        let policy = binder.bind(i, params, &pool)?;
        let mut agent = AgentState::new(i, config.memory, params.tag());
        agent.committed_to = resolved.committed[i];
        if let Some(target) = agent.committed_to {
            agent.inventory = Inventory::singleton(target);
        } else if let Some(seed_name) = resolved.seeded {
            agent.inventory = Inventory::singleton(seed_name);
            if config.dynamics == Dynamics::MemoryCoordination {
                for _ in 0..config.memory {
                    agent
                        .memory
                        .push(InteractionRecord::new(0, seed_name, seed_name, payoffs));
                }
            }
        }
        policies.push(policy);
        agents.push(agent);
    }

    let trajectory = Trajectory {
        seed: config.seed,
        config_hash: resolved.config_hash.clone(),
        agents: n,
        labels: Vec::new(),
        committed_present: resolved.committed.iter().any(Option::is_some),
        initial_consensus: None,
        steps: Vec::new(),
        distinct_names: Vec::new(),
        consensus: Vec::new(),
        consensus_step: None,
        winner: None,
    };

    let mut state = SimulationState {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        holders: vec![0; pool.len()],
        settled_counts: vec![0; pool.len()],
        settled: vec![None; n],
        distinct: 0,
        step: 0,
        round: Vec::new(),
        resolved,
        pool,
        agents,
        policies,
        trajectory,
    };
    for i in 0..n {
        let names: Vec<ConventionId> = state.agents[i].inventory.iter().collect();
        for name in names {
            state.add_holder(name);
        }
        state.refresh_settled(i);
    }
    state.trajectory.initial_consensus = state.consensus_name();
    Ok(state)
}

impl SimulationState {
    pub fn config(&self) -> &PopulationConfig {
        &self.resolved.config
    }

    pub fn resolved(&self) -> &ResolvedConfig {
        &self.resolved
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn pool(&self) -> &NamePool {
        &self.pool
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn max_steps(&self) -> u64 {
        self.resolved.max_steps
    }

    pub fn distinct_names(&self) -> u32 {
        self.distinct
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn view(&self, agent: AgentId) -> AgentView<'_> {
        AgentView::of(&self.agents[agent], &self.pool)
    }

    /// Settled choice of one agent as tracked by the engine.
    pub fn settled_choice(&self, agent: AgentId) -> Option<ConventionId> {
        self.settled[agent]
    }

    /// Name every agent is settled on, maintained incrementally.
    pub fn consensus_name(&self) -> Option<ConventionId> {
        let c = self.settled[0]?;
        (self.settled_counts[c.index()] as usize == self.agents.len()).then_some(c)
    }

    /// Next pair of distinct agents. Under the minimal naming game the first
    /// element speaks.
    pub fn draw_pair(&mut self) -> (AgentId, AgentId) {
        let n = self.agents.len();
        match self.resolved.config.pairing {
            Pairing::PerStepRandomPair => {
                let a = self.rng.gen_range(0..n);
                let mut b = self.rng.gen_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                (a, b)
            }
            Pairing::PerRoundPerfectMatching => {
                if self.round.is_empty() {
                    let mut order: Vec<AgentId> = (0..n).collect();
                    order.shuffle(&mut self.rng);
                    self.round = order.chunks_exact(2).rev().map(|p| (p[0], p[1])).collect();
                }
                self.round.pop().expect("round holds n/2 pairs")
            }
        }
    }

    pub fn step(&mut self) -> Result<InteractionOutcome, StepError> {
        if self.step >= self.resolved.max_steps {
            return Err(StepError::Exhausted {
                max_steps: self.resolved.max_steps,
            });
        }
        let (a, b) = self.draw_pair();
        let draw_a = self.rng.next_u64();
        let draw_b = self.rng.next_u64();
        let t = self.step + 1;

        let outcome = match self.resolved.config.dynamics {
            Dynamics::MinimalNg => self.minimal_ng_step(t, a, b, draw_a)?,
            Dynamics::MemoryCoordination => self.coordination_step(t, a, b, draw_a, draw_b)?,
        };

        self.step = t;
        self.refresh_settled(a);
        self.refresh_settled(b);
        self.trajectory.steps.push(outcome.record);
        self.trajectory.distinct_names.push(self.distinct);
        self.trajectory.consensus.push(self.consensus_name());
        Ok(outcome)
    }

    fn minimal_ng_step(
        &mut self,
        t: u64,
        a: AgentId,
        b: AgentId,
        draw: u64,
    ) -> Result<InteractionOutcome, StepError> {
        let decision = self.policies[a]
            .choose(&self.view(a), draw)
            .map_err(|source| StepError::Policy { agent: a, source })?;
        let name = match decision {
            Decision::Name(name) => name,
            Decision::Invent => {
                let name = self.pool.invent();
                self.holders.push(0);
                self.settled_counts.push(0);
                if self.agents[a].inventory.insert(name) {
                    self.add_holder(name);
                }
                name
            }
        };
        let success = self.agents[b].inventory.contains(name);

        let before = (self.agents[a].inventory.clone(), self.agents[b].inventory.clone());
        let (sa, sb) = pair_mut(&mut self.agents, a, b);
        minimal_ng_update(sa, sb, name, success);
        self.retally(a, &before.0);
        self.retally(b, &before.1);

        Ok(InteractionOutcome {
            record: StepRecord {
                step: t,
                a,
                b,
                choice_a: name,
                choice_b: success.then_some(name),
                success,
            },
            delivered: None,
        })
    }

    fn coordination_step(
        &mut self,
        t: u64,
        a: AgentId,
        b: AgentId,
        draw_a: u64,
        draw_b: u64,
    ) -> Result<InteractionOutcome, StepError> {
        let ca = self.choose_fixed(a, draw_a)?;
        let cb = self.choose_fixed(b, draw_b)?;
        let payoffs = (
            self.resolved.config.payoff_success,
            self.resolved.config.payoff_failure,
        );
        let rec_a = InteractionRecord::new(t, ca, cb, payoffs);
        let rec_b = InteractionRecord::new(t, cb, ca, payoffs);

        let before = (self.agents[a].inventory.clone(), self.agents[b].inventory.clone());
        memory_update(&mut self.agents[a], rec_a);
        memory_update(&mut self.agents[b], rec_b);
        self.retally(a, &before.0);
        self.retally(b, &before.1);

        Ok(InteractionOutcome {
            record: StepRecord {
                step: t,
                a,
                b,
                choice_a: ca,
                choice_b: Some(cb),
                success: ca == cb,
            },
            delivered: Some((rec_a, rec_b)),
        })
    }

    fn choose_fixed(&self, agent: AgentId, draw: u64) -> Result<ConventionId, StepError> {
        let fail = |source| StepError::Policy { agent, source };
        match self.policies[agent].choose(&self.view(agent), draw).map_err(fail)? {
            Decision::Name(c) if c.index() < self.pool.fixed_len() => Ok(c),
            Decision::Name(c) => Err(fail(PolicyError::Provider(format!(
                "name {c} is outside the fixed pool"
            )))),
            Decision::Invent => Err(fail(PolicyError::Provider(
                "invention is not available with a fixed pool".into(),
            ))),
        }
    }

    fn add_holder(&mut self, name: ConventionId) {
        let h = &mut self.holders[name.index()];
        if *h == 0 {
            self.distinct += 1;
        }
        *h += 1;
    }

    fn remove_holder(&mut self, name: ConventionId) {
        let h = &mut self.holders[name.index()];
        *h -= 1;
        if *h == 0 {
            self.distinct -= 1;
        }
    }

    fn retally(&mut self, agent: AgentId, before: &Inventory) {
        let after = self.agents[agent].inventory.clone();
        for name in before.iter().filter(|n| !after.contains(*n)) {
            self.remove_holder(name);
        }
        for name in after.iter().filter(|n| !before.contains(*n)) {
            self.add_holder(name);
        }
    }

    fn refresh_settled(&mut self, agent: AgentId) {
        let now = self.policies[agent].settled_choice(&self.view(agent));
        if let Some(old) = self.settled[agent] {
            self.settled_counts[old.index()] -= 1;
        }
        if let Some(new) = now {
            self.settled_counts[new.index()] += 1;
        }
        self.settled[agent] = now;
    }

    fn finish(mut self, consensus_step: Option<u64>, winner: Option<ConventionId>) -> Trajectory {
        self.trajectory.consensus_step = consensus_step;
        self.trajectory.winner = winner;
        self.trajectory.labels = self.pool.labels().to_vec();
        self.trajectory
    }
}

fn pair_mut<T>(items: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (lo, hi) = items.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = items.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

/// Consensus predicate recomputed from scratch: every agent's settled choice
/// is the same name and, under the minimal naming game, every inventory is
/// exactly that name.
pub fn is_consensus(state: &SimulationState) -> bool {
    consensus_of(state).is_some()
}

pub fn consensus_of(state: &SimulationState) -> Option<ConventionId> {
    let minimal = state.config().dynamics == Dynamics::MinimalNg;
    let mut common = None;
    for (i, agent) in state.agents.iter().enumerate() {
        let choice = state.policies[i].settled_choice(&state.view(i))?;
        if minimal && agent.inventory.single() != Some(choice) {
            return None;
        }
        match common {
            None => common = Some(choice),
            Some(c) if c != choice => return None,
            _ => {}
        }
    }
    common
}

pub fn run_simulation(config: &PopulationConfig) -> Result<Trajectory, SimError> {
    let state = init_population(config)?;
    Ok(run_to_completion(state)?)
}

/// Steps until consensus is confirmed: the population stays settled on one
/// name through a full sweep (N/2 consecutive successful interactions on that
/// name). The reported consensus step is the first step of that sweep. Under
/// [`Horizon::Full`] the run continues to `max_steps` regardless.
pub fn run_to_completion(mut state: SimulationState) -> Result<Trajectory, StepError> {
    let sweep = (state.agents.len() / 2).max(1) as u64;
    let full = state.config().horizon == Horizon::Full;
    let mut streak: Option<(ConventionId, u64, u64)> = None;
    let mut confirmed: Option<(u64, ConventionId)> = None;

    while state.step < state.resolved.max_steps {
        let outcome = state.step()?;
        let agreed = outcome.record.agreed();
        streak = match (state.consensus_name(), streak) {
            (Some(c), Some((name, start, len))) if name == c && agreed == Some(c) => {
                Some((c, start, len + 1))
            }
            (Some(c), _) if agreed == Some(c) => Some((c, state.step, 1)),
            _ => None,
        };
        if let Some((c, start, len)) = streak {
            if len >= sweep && confirmed.is_none() {
                confirmed = Some((start, c));
                if !full {
                    break;
                }
            }
        }
    }
    let (step, winner) = confirmed.unzip();
    Ok(state.finish(step, winner))
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::engine::config::{Commitment, Init, PoolSpec};
    use crate::policies::PolicyParams;

    #[test]
    fn smallest_population_starts_empty() {
        let state = init_population(&PopulationConfig::minimal_ng(2)).unwrap();
        assert_eq!(state.agents().len(), 2);
        assert!(state.agents().iter().all(|a| a.inventory.is_empty() && a.memory.is_empty()));
        assert_eq!(state.step_count(), 0);
        assert!(!is_consensus(&state));
    }

    #[test]
    fn seeded_consensus_fills_inventories() {
        let mut cfg = PopulationConfig::minimal_ng(4);
        cfg.init = Init::SeededConsensus("A".into());
        let state = init_population(&cfg).unwrap();
        for a in state.agents() {
            assert_eq!(a.inventory.as_slice(), &[ConventionId(0)]);
        }
        assert!(is_consensus(&state));
        assert_eq!(state.consensus_name(), Some(ConventionId(0)));
    }

    #[test]
    fn odd_population_rejects_perfect_matching() {
        let mut cfg = PopulationConfig::minimal_ng(3);
        cfg.pairing = Pairing::PerRoundPerfectMatching;
        assert_eq!(init_population(&cfg).unwrap_err().field, "pairing");
    }

    #[test]
    fn two_agents_always_pair_with_each_other() {
        let mut state = init_population(&PopulationConfig::minimal_ng(2)).unwrap();
        for _ in 0..100 {
            let (a, b) = state.draw_pair();
            assert_eq!((a.min(b), a.max(b)), (0, 1));
        }
    }

    #[test]
    fn perfect_matching_partitions_each_round() {
        let mut cfg = PopulationConfig::minimal_ng(4);
        cfg.pairing = Pairing::PerRoundPerfectMatching;
        let mut state = init_population(&cfg).unwrap();
        for _ in 0..200 {
            let (a, b) = state.draw_pair();
            let (c, d) = state.draw_pair();
            let mut seen = [a, b, c, d];
            seen.sort();
            assert_eq!(seen, [0, 1, 2, 3]);
        }
    }

    #[test]
    fn pair_draws_are_uniform() {
        let n = 100;
        let draws = 1_000_000u64;
        let mut state = init_population(&PopulationConfig::minimal_ng(n).with_seed(5)).unwrap();
        let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
        for _ in 0..draws {
            let (a, b) = state.draw_pair();
            assert_ne!(a, b);
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        let pairs = (n * (n - 1) / 2) as f64;
        assert_eq!(counts.len() as f64, pairs);
        let p = 1.0 / pairs;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for &c in counts.values() {
            assert!((c as f64 - mean).abs() < 5.0 * sd, "count {c} vs {mean}");
            chi2 += (c as f64 - mean).powi(2) / mean;
        }
        // df = 4949; mean 4949, sd ~ 99.5
        assert!((chi2 - (pairs - 1.0)).abs() < 5.0 * (2.0 * (pairs - 1.0)).sqrt(), "chi2 {chi2}");
    }

    fn committed_pair(a: &str, b: &str) -> PopulationConfig {
        let mut cfg = PopulationConfig::memory_coordination(2, 2);
        cfg.committed = vec![
            Commitment { agent: 0, target: a.into() },
            Commitment { agent: 1, target: b.into() },
        ];
        cfg.max_steps = Some(50);
        cfg
    }

    #[test]
    fn committed_agreement_pays_success() {
        let mut state = init_population(&committed_pair("A", "A")).unwrap();
        let out = state.step().unwrap();
        assert!(out.record.success);
        let (ra, rb) = out.delivered.unwrap();
        assert_eq!((ra.payoff, rb.payoff), (1, 1));
    }

    #[test]
    fn committed_disagreement_never_changes() {
        let mut state = init_population(&committed_pair("A", "B")).unwrap();
        for _ in 0..50 {
            let out = state.step().unwrap();
            assert!(!out.record.success);
            let (ra, rb) = out.delivered.unwrap();
            assert_eq!((ra.payoff, rb.payoff), (-1, -1));
            let (ca, cb) = (ra.own_choice, rb.own_choice);
            let expected = if out.record.a == 0 { (ConventionId(0), ConventionId(1)) } else { (ConventionId(1), ConventionId(0)) };
            assert_eq!((ca, cb), expected);
        }
        assert!(matches!(state.step(), Err(StepError::Exhausted { max_steps: 50 })));
    }

    #[test]
    fn two_agent_minimal_game_fails_then_agrees() {
        for seed in 0..200 {
            let mut state = init_population(&PopulationConfig::minimal_ng(2).with_seed(seed)).unwrap();
            let first = state.step().unwrap().record;
            assert!(!first.success);
            let second = state.step().unwrap().record;
            assert!(second.success);
            assert_eq!(second.choice_a, first.choice_a);
            assert!(is_consensus(&state));
        }
    }

    #[test]
    fn consensus_predicate_examples() {
        let mut cfg = PopulationConfig::minimal_ng(3);
        cfg.init = Init::SeededConsensus("A".into());
        let mut state = init_population(&cfg).unwrap();
        assert!(is_consensus(&state));
        // Teach agent 2 a second name: {A}, {A}, {A, B}.
        let before = state.agents[2].inventory.clone();
        state.agents[2].inventory.insert(ConventionId(1));
        state.retally(2, &before);
        state.refresh_settled(2);
        assert!(!is_consensus(&state));
        assert_eq!(state.consensus_name(), None);
    }

    #[test]
    fn memory_consensus_from_successes() {
        let mut cfg = PopulationConfig::memory_coordination(4, 3);
        cfg.init = Init::SeededConsensus("B".into());
        let state = init_population(&cfg).unwrap();
        assert_eq!(consensus_of(&state), Some(ConventionId(1)));
        assert_eq!(state.consensus_name(), Some(ConventionId(1)));
    }

    #[test]
    fn incremental_tracking_matches_recomputation() {
        let mut cfg = PopulationConfig::memory_coordination(10, 3).with_seed(3);
        cfg.max_steps = Some(3000);
        let mut state = init_population(&cfg).unwrap();
        for _ in 0..3000 {
            state.step().unwrap();
            assert_eq!(state.consensus_name(), consensus_of(&state));
            let actual: std::collections::HashSet<ConventionId> =
                state.agents().iter().flat_map(|a| a.inventory.iter()).collect();
            assert_eq!(actual.len() as u32, state.distinct_names());
        }

        let mut state = init_population(&PopulationConfig::minimal_ng(12).with_seed(4)).unwrap();
        for _ in 0..2000 {
            state.step().unwrap();
            assert_eq!(state.consensus_name(), consensus_of(&state));
            let actual: std::collections::HashSet<ConventionId> =
                state.agents().iter().flat_map(|a| a.inventory.iter()).collect();
            assert_eq!(actual.len() as u32, state.distinct_names());
        }
    }

    #[test]
    fn two_agent_run_confirms_at_step_two() {
        for seed in 0..100 {
            let traj = run_simulation(&PopulationConfig::minimal_ng(2).with_seed(seed)).unwrap();
            assert_eq!(traj.consensus_step, Some(2));
            assert_eq!(traj.winner, Some(traj.steps[0].choice_a));
            assert_eq!(traj.steps.len(), 2);
        }
    }

    #[test]
    fn exhaustion_is_not_an_error() {
        let mut cfg = PopulationConfig::minimal_ng(50);
        cfg.max_steps = Some(10);
        let traj = run_simulation(&cfg).unwrap();
        assert_eq!(traj.steps.len(), 10);
        assert_eq!(traj.consensus_step, None);
        assert_eq!(traj.winner, None);
    }

    #[test]
    fn label_text_does_not_affect_dynamics() {
        let mut cfg = PopulationConfig::memory_coordination(8, 3).with_seed(21);
        cfg.pool = PoolSpec::Labels(vec!["x".into(), "y".into(), "z".into()]);
        let a = run_simulation(&cfg).unwrap();
        cfg.pool = PoolSpec::Labels(vec!["z".into(), "x".into(), "y".into()]);
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn external_kind_needs_binding() {
        let mut cfg = PopulationConfig::memory_coordination(4, 2);
        cfg.policy = Some(PolicyParams::external());
        assert_eq!(init_population(&cfg).unwrap_err().field, "policy.kind");
    }
}
