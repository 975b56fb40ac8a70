use super::run_batch;
use crate::engine::{ConventionId, Horizon, PopulationConfig, SimError, Trajectory};
use crate::policies::PolicyParams;

/// Stability window, in sweeps, a consensus must last to count.
pub const DEFAULT_THETA: usize = 3;

/// Prior on the favoured name in the default strong-bias setting. Above the
/// score of one failure-hit memory, below that of a full memory of successes.
pub const STRONG_BIAS_PRIOR: f64 = 7.0;
pub const STRONG_BIAS_EPSILON: f64 = 0.005;

/// Memory agents strongly favouring `label`, with a small error rate.
pub fn strong_bias_params(label: impl Into<String>) -> PolicyParams {
    PolicyParams::memory()
        .with_pseudo_count(label, STRONG_BIAS_PRIOR)
        .with_epsilon(STRONG_BIAS_EPSILON)
}

/// Maximal stretch of steps over which the population is settled on `name`.
/// Step 0 is the initial population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsensusHold {
    pub name: ConventionId,
    pub start: u64,
    pub end: u64,
}

impl ConsensusHold {
    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn consensus_holds(traj: &Trajectory) -> Vec<ConsensusHold> {
    let statuses = std::iter::once(traj.initial_consensus).chain(traj.consensus.iter().copied());
    let mut holds: Vec<ConsensusHold> = Vec::new();
    let mut open: Option<ConsensusHold> = None;
    for (step, status) in statuses.enumerate() {
        let step = step as u64;
        open = match (open, status) {
            (Some(h), Some(c)) if h.name == c => Some(ConsensusHold { end: step, ..h }),
            (prev, now) => {
                holds.extend(prev);
                now.map(|name| ConsensusHold { name, start: step, end: step })
            }
        };
    }
    holds.extend(open);
    holds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchEvent {
    pub from: ConventionId,
    pub to: ConventionId,
    /// Last step of the outgoing consensus.
    pub start_step: u64,
    /// First step of the incoming consensus.
    pub end_step: u64,
    pub committed_present: bool,
}

/// Steps a hold must last to count as established.
pub fn hold_window(traj: &Trajectory, theta: usize) -> u64 {
    (theta.max(1) * traj.sweep_len()) as u64
}

/// Consensus changes between names that each hold for at least `theta`
/// sweeps. A consensus present at step 0 counts as established whatever its
/// length.
pub fn detect_switches(traj: &Trajectory, theta: usize) -> Vec<SwitchEvent> {
    let window = hold_window(traj, theta);
    let mut events = Vec::new();
    let mut last: Option<ConsensusHold> = None;
    for hold in consensus_holds(traj).into_iter().filter(|h| h.start == 0 || h.len() >= window) {
        match last {
            Some(prev) if prev.name != hold.name => events.push(SwitchEvent {
                from: prev.name,
                to: hold.name,
                start_step: prev.end,
                end_step: hold.start,
                committed_present: traj.committed_present,
            }),
            _ => {}
        }
        last = Some(hold);
    }
    events
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchAssay {
    pub runs: usize,
    pub runs_with_switch: usize,
    pub events: usize,
    pub committed_present: bool,
}

impl SwitchAssay {
    pub fn rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.runs_with_switch as f64 / self.runs as f64
        }
    }
}

/// Fraction of independent runs showing at least one consensus switch.
/// Runs always go to `max_steps`.
pub fn switch_assay(config: &PopulationConfig, runs: usize, theta: usize) -> Result<SwitchAssay, SimError> {
    let config = &PopulationConfig { horizon: Horizon::Full, ..config.clone() };
    let resolved = config.validate()?;
    let per_run = run_batch(config, runs, |_, traj| detect_switches(&traj, theta).len())?;
    Ok(SwitchAssay {
        runs,
        runs_with_switch: per_run.iter().filter(|&&e| e > 0).count(),
        events: per_run.iter().sum(),
        committed_present: resolved.committed.iter().any(Option::is_some),
    })
}
