//! Exact consensus-time distribution of the minimal naming game on a
//! complete graph, by enumerating every pair and spoken-name branch.

use std::collections::{BTreeSet, HashMap};

type Inventories = Vec<BTreeSet<u32>>;

fn settled_together(inv: &Inventories) -> bool {
    let first = &inv[0];
    first.len() == 1 && inv.iter().all(|s| s == first)
}

/// `dist[t - 1]` is the probability that the first successful step taken
/// while all agents share one single-name inventory is step `t`; the last
/// entry holds the mass beyond `depth`.
pub fn consensus_time_distribution(n: usize, depth: usize) -> Vec<f64> {
    let mut dist = vec![0.0; depth + 1];
    let mut frontier: HashMap<Inventories, f64> = HashMap::new();
    frontier.insert(vec![BTreeSet::new(); n], 1.0);
    let pair_p = 1.0 / (n * (n - 1)) as f64;

    for t in 1..=depth {
        let mut next: HashMap<Inventories, f64> = HashMap::new();
        for (inv, p) in &frontier {
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    let options: Vec<u32> = if inv[a].is_empty() {
                        let fresh = inv.iter().flatten().max().map_or(0, |m| m + 1);
                        vec![fresh]
                    } else {
                        inv[a].iter().copied().collect()
                    };
                    let branch_p = p * pair_p / options.len() as f64;
                    for name in options {
                        let mut after = inv.clone();
                        after[a].insert(name);
                        let success = after[b].contains(&name);
                        if success {
                            after[a] = BTreeSet::from([name]);
                            after[b] = BTreeSet::from([name]);
                        } else {
                            after[b].insert(name);
                        }
                        if success && settled_together(&after) {
                            dist[t - 1] += branch_p;
                        } else {
                            *next.entry(after).or_insert(0.0) += branch_p;
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    dist[depth] = frontier.values().sum();
    dist
}

/// Empirical distribution binned like [`consensus_time_distribution`].
pub fn binned(times: &[Option<u64>], depth: usize) -> Vec<f64> {
    let mut counts = vec![0.0; depth + 1];
    for t in times {
        match t {
            Some(t) if (1..=depth as u64).contains(t) => counts[*t as usize - 1] += 1.0,
            _ => counts[depth] += 1.0,
        }
    }
    let total = times.len() as f64;
    counts.iter().map(|c| c / total).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
