//! Batch assays over many seeded runs.
//!
//! Every assay derives run `i`'s seed from the config's master seed with
//! [`derive_seed`], fans the runs out on the rayon pool and merges results
//! by run index, so statistics do not depend on scheduling.

mod bias;
mod scaling;
mod switches;
mod tipping;

use rayon::prelude::*;

use crate::engine::{derive_seed, run_simulation, PopulationConfig, SimError, Trajectory};

pub use bias::{bias_assay, individual_bias_probe, BiasProbe, WinnerHistogram};
pub use scaling::{convergence_scan, ScalingPoint, ScalingReport};
pub use switches::{
    consensus_holds, detect_switches, hold_window, strong_bias_params, switch_assay, ConsensusHold, SwitchAssay,
    SwitchEvent, DEFAULT_THETA, STRONG_BIAS_EPSILON, STRONG_BIAS_PRIOR,
};
pub use tipping::{committed_count, tipping_scan, TippingCurve, TippingPoint, TippingSettings};

/// Runs `runs` independent simulations of `config` and maps each finished
/// trajectory through `summarize`, preserving run order.
pub fn run_batch<T, F>(config: &PopulationConfig, runs: usize, summarize: F) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(usize, Trajectory) -> T + Sync,
{
    config.validate()?;
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let cfg = config.clone().with_seed(derive_seed(config.seed, i as u64));
            run_simulation(&cfg).map(|traj| summarize(i, traj))
        })
        .collect()
}
