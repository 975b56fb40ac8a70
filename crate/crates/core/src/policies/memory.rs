use rand::Rng;

use super::{decision_rng, PolicyParams};
use crate::engine::{AgentState, ConventionId, InteractionRecord, Memory, NamePool};

/// Relative tolerance used when comparing scores for ties.
const TIE_EPS: f64 = 1e-9;

/// Resolved scoring parameters over a fixed pool of `pseudo_counts.len()` names.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRule {
    pub epsilon: f64,
    pub temperature: f64,
    pub kappa: f64,
    pub pseudo_counts: Vec<f64>,
}

impl MemoryRule {
    pub fn unbiased(pool_size: usize) -> Self {
        MemoryRule {
            epsilon: 0.0,
            temperature: 0.0,
            kappa: 1.0,
            pseudo_counts: vec![0.0; pool_size],
        }
    }

    pub fn from_params(params: &PolicyParams, pool: &NamePool) -> Self {
        let mut pseudo_counts = vec![0.0; pool.fixed_len()];
        for (label, value) in &params.pseudo_counts {
            if let Some(id) = pool.id(label) {
                pseudo_counts[id.index()] = *value;
            }
        }
        MemoryRule {
            epsilon: params.epsilon,
            temperature: params.temperature,
            kappa: params.kappa,
            pseudo_counts,
        }
    }

    pub fn pool_size(&self) -> usize {
        self.pseudo_counts.len()
    }
}

/// score(c) = prior(c) + payoffs of records where c was played
///          + kappa * records where the partner played c.
pub fn memory_scores(memory: &Memory, rule: &MemoryRule) -> Vec<f64> {
    let mut scores = rule.pseudo_counts.clone();
    for rec in memory.iter() {
        if let Some(s) = scores.get_mut(rec.own_choice.index()) {
            *s += rec.payoff as f64;
        }
        if let Some(s) = scores.get_mut(rec.partner_choice.index()) {
            *s += rule.kappa;
        }
    }
    scores
}

/// All names within tolerance of the best score, in id order.
pub fn argmax_set(scores: &[f64]) -> Vec<ConventionId> {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_EPS * best.abs().max(1.0);
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= best - tol)
        .map(|(i, _)| ConventionId(i as u32))
        .collect()
}

pub fn memory_choose(memory: &Memory, rule: &MemoryRule, draw: u64) -> ConventionId {
    let mut rng = decision_rng(draw);
    let w = rule.pool_size();
    if rule.epsilon > 0.0 && rng.gen::<f64>() < rule.epsilon {
        return ConventionId(rng.gen_range(0..w) as u32);
    }
    let scores = memory_scores(memory, rule);
    if rule.temperature == 0.0 {
        let best = argmax_set(&scores);
        if best.len() == 1 {
            best[0]
        } else {
            best[rng.gen_range(0..best.len())]
        }
    } else {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores
            .iter()
            .map(|s| ((s - max) / rule.temperature).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        for (i, wgt) in weights.iter().enumerate() {
            if u < *wgt {
                return ConventionId(i as u32);
            }
            u -= wgt;
        }
        ConventionId((w - 1) as u32)
    }
}

/// Appends the record (evicting the oldest past capacity) and adds both
/// choices to the inventory.
pub fn memory_update(agent: &mut AgentState, record: InteractionRecord) {
    agent.inventory.insert(record.own_choice);
    agent.inventory.insert(record.partner_choice);
    agent.memory.push(record);
}
