use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::switches::{consensus_holds, detect_switches, hold_window, DEFAULT_THETA};
use super::run_batch;
use crate::engine::{derive_seed, Commitment, ConfigError, Horizon, Init, PopulationConfig, SimError};
use crate::stats::{fit_logistic, quantile_sorted, BinomialPoint, LogisticFit};

#[derive(Debug, Clone, PartialEq)]
pub struct TippingSettings {
    /// Label the committed minority pushes.
    pub challenger: String,
    pub p_grid: Vec<f64>,
    pub runs_per_point: usize,
    pub bootstrap_resamples: usize,
    pub theta: usize,
}

impl TippingSettings {
    pub fn new(challenger: impl Into<String>, p_grid: Vec<f64>, runs_per_point: usize) -> Self {
        TippingSettings {
            challenger: challenger.into(),
            p_grid,
            runs_per_point,
            bootstrap_resamples: 200,
            theta: DEFAULT_THETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TippingPoint {
    pub p: f64,
    pub committed: usize,
    pub takeovers: usize,
    pub runs: usize,
    /// Runs with at least one detected consensus switch.
    pub switch_runs: usize,
}

impl TippingPoint {
    pub fn takeover_freq(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.takeovers as f64 / self.runs as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.runs == 0 {
            return 0.0;
        }
        let f = self.takeover_freq();
        (f * (1.0 - f) / self.runs as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TippingCurve {
    pub points: Vec<TippingPoint>,
    pub fit: Option<LogisticFit>,
    pub p_c_hat: Option<f64>,
    /// Bootstrap percentile 95% interval for `p_c_hat`.
    pub ci: Option<(f64, f64)>,
}

/// Committed agents for fraction `p`: N·p rounded half-up.
pub fn committed_count(n: usize, p: f64) -> usize {
    ((n as f64 * p) + 0.5 + 1e-9).floor() as usize
}

/// Sweeps the committed fraction, measuring how often the challenger
/// convention overturns the seeded one. A takeover is a consensus on the
/// challenger lasting `theta` sweeps. Runs always go to `max_steps`, and run
/// `i` uses the same seed at every grid point.
pub fn tipping_scan(base: &PopulationConfig, settings: &TippingSettings) -> Result<TippingCurve, SimError> {
    let resolved = base.validate()?;
    let Init::SeededConsensus(incumbent) = &base.init else {
        return Err(ConfigError::new("init", "tipping scan needs a seeded consensus").into());
    };
    let challenger = resolved
        .pool
        .id(&settings.challenger)
        .ok_or_else(|| ConfigError::new("challenger", format!("{:?} is not in the pool", settings.challenger)))?;
    if *incumbent == settings.challenger {
        return Err(ConfigError::new("challenger", "challenger must differ from the seeded name").into());
    }
    if let Some(p) = settings.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ConfigError::new("p_grid", format!("{p} is outside [0, 1]")).into());
    }

    let mut grid = settings.p_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(grid.len());
    let mut outcomes: Vec<Vec<bool>> = Vec::with_capacity(grid.len());
    for &p in &grid {
        let k = committed_count(base.n, p);
        let mut cfg = PopulationConfig { horizon: Horizon::Full, ..base.clone() };
        cfg.committed = (0..k)
            .map(|agent| Commitment { agent, target: settings.challenger.clone() })
            .collect();
        let per_run = run_batch(&cfg, settings.runs_per_point, |_, traj| {
            let window = hold_window(&traj, settings.theta);
            let takeover = consensus_holds(&traj)
                .iter()
                .any(|h| h.name == challenger && h.len() >= window);
            let switched = !detect_switches(&traj, settings.theta).is_empty();
            (takeover, switched)
        })?;
        points.push(TippingPoint {
            p,
            committed: k,
            takeovers: per_run.iter().filter(|r| r.0).count(),
            runs: per_run.len(),
            switch_runs: per_run.iter().filter(|r| r.1).count(),
        });
        outcomes.push(per_run.into_iter().map(|r| r.0).collect());
    }

    let binomial: Vec<BinomialPoint> = points
        .iter()
        .map(|pt| BinomialPoint { x: pt.p, successes: pt.takeovers as u64, trials: pt.runs as u64 })
        .collect();
    let fit = fit_logistic(&binomial);
    let p_c_hat = fit.and_then(|f| f.crossing());
    let ci = p_c_hat.and_then(|_| {
        bootstrap_crossing(&grid, &outcomes, settings.bootstrap_resamples, derive_seed(base.seed, u64::MAX))
    });
    Ok(TippingCurve { points, fit, p_c_hat, ci })
}

/// Percentile interval of the crossing over resamples drawn with
/// replacement within each grid point.
fn bootstrap_crossing(grid: &[f64], outcomes: &[Vec<bool>], resamples: usize, seed: u64) -> Option<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut crossings = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let points: Vec<BinomialPoint> = grid
            .iter()
            .zip(outcomes)
            .map(|(&x, runs)| {
                let successes = (0..runs.len())
                    .filter(|_| runs[rng.gen_range(0..runs.len())])
                    .count();
                BinomialPoint { x, successes: successes as u64, trials: runs.len() as u64 }
            })
            .collect();
        if let Some(c) = fit_logistic(&points).and_then(|f| f.crossing()) {
            crossings.push(c);
        }
    }
    if crossings.is_empty() {
        return None;
    }
    crossings.sort_by(f64::total_cmp);
    Some((quantile_sorted(&crossings, 0.025)?, quantile_sorted(&crossings, 0.975)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn committed_count_rounds_half_up() {
        assert_eq!(committed_count(24, 0.0), 0);
        assert_eq!(committed_count(24, 0.05), 1);
        assert_eq!(committed_count(24, 0.1), 2);
        assert_eq!(committed_count(10, 0.25), 3);
        assert_eq!(committed_count(10, 0.15), 2);
        assert_eq!(committed_count(24, 1.0), 24);
    }

    fn base() -> PopulationConfig {
        let mut cfg = PopulationConfig::memory_coordination(10, 2).with_seed(3);
        cfg.init = Init::SeededConsensus("A".into());
        cfg.max_steps = Some(4000);
        cfg
    }

    #[test]
    fn rejects_grid_outside_unit_interval() {
        let s = TippingSettings::new("B", vec![0.0, 1.5], 2);
        let err = tipping_scan(&base(), &s).unwrap_err();
        assert!(matches!(err, SimError::Config(e) if e.field == "p_grid"));
    }

    #[test]
    fn requires_seeded_incumbent_and_distinct_challenger() {
        let mut cfg = base();
        cfg.init = Init::EmptyInventory;
        let s = TippingSettings::new("B", vec![0.0], 2);
        assert!(matches!(tipping_scan(&cfg, &s), Err(SimError::Config(e)) if e.field == "init"));
        let s = TippingSettings::new("A", vec![0.0], 2);
        assert!(matches!(tipping_scan(&base(), &s), Err(SimError::Config(e)) if e.field == "challenger"));
    }

    #[test]
    fn endpoints_behave() {
        let s = TippingSettings::new("B", vec![1.0, 0.0], 20);
        let curve = tipping_scan(&base(), &s).unwrap();
        assert_eq!(curve.points[0].p, 0.0);
        assert_eq!(curve.points[0].takeover_freq(), 0.0);
        assert_eq!(curve.points[1].takeover_freq(), 1.0);
        assert_eq!(curve.points[1].committed, 10);
    }

    #[test]
    fn takeover_without_commitment_is_a_switch() {
        let mut cfg = base();
        cfg.policy = Some(crate::experiments::strong_bias_params("B"));
        let s = TippingSettings::new("B", vec![0.0], 30);
        let p0 = &tipping_scan(&cfg, &s).unwrap().points[0];
        assert!(p0.takeovers > 0);
        assert_eq!(p0.takeovers, p0.switch_runs);
    }
}
