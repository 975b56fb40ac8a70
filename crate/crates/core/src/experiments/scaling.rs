use log::warn;

use super::run_batch;
use crate::engine::{ConfigError, Dynamics, PopulationConfig, SimError};
use crate::stats::{linear_fit, mean, median};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub n: usize,
    pub times: Vec<u64>,
    pub non_converged: usize,
}

impl ScalingPoint {
    fn as_f64(&self) -> Vec<f64> {
        self.times.iter().map(|&t| t as f64).collect()
    }

    pub fn median(&self) -> Option<f64> {
        median(&self.as_f64())
    }

    pub fn mean(&self) -> Option<f64> {
        mean(&self.as_f64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of log(consensus step) on log(N) over all runs.
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

impl ScalingReport {
    pub fn non_converged(&self) -> usize {
        self.points.iter().map(|p| p.non_converged).sum()
    }
}

/// Consensus time statistics of the minimal naming game across population
/// sizes, with a power-law exponent fitted on the individual runs.
pub fn convergence_scan(base: &PopulationConfig, n_list: &[usize], runs: usize) -> Result<ScalingReport, SimError> {
    if base.dynamics != Dynamics::MinimalNg {
        return Err(ConfigError::new("dynamics", "scaling scan runs the minimal naming game").into());
    }
    if n_list.len() < 3 {
        return Err(ConfigError::new("n_list", "need at least three population sizes").into());
    }
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let cfg = PopulationConfig { n, ..base.clone() };
        let steps = run_batch(&cfg, runs, |_, traj| traj.consensus_step)?;
        let non_converged = steps.iter().filter(|s| s.is_none()).count();
        if non_converged > 0 {
            warn!("{non_converged} of {runs} runs at N={n} did not reach consensus");
        }
        points.push(ScalingPoint {
            n,
            times: steps.into_iter().flatten().collect(),
            non_converged,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .flat_map(|p| p.times.iter().map(move |&t| ((p.n as f64).ln(), (t as f64).ln())))
        .unzip();
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| ConfigError::new("runs", "too few converged runs to fit an exponent"))?;
    Ok(ScalingReport {
        points,
        slope: fit.slope,
        slope_se: fit.slope_se,
        intercept: fit.intercept,
    })
}
