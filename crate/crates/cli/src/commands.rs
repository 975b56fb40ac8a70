use std::fmt::Write as _;
use std::sync::Arc;

use convention_lab::engine::{
    init_population_with, run_to_completion, AgentState, BuiltinPolicies, NamePool, PolicyTag, PopulationConfig,
};
use convention_lab::experiments::{
    bias_assay, convergence_scan, individual_bias_probe, tipping_scan, TippingSettings,
};
use convention_lab::llm_adapter::{meta_probe, Client, ClientConfig, ExternalBinder, MockEndpoint, Stance};
use convention_lab::policies::PolicyKind;

use crate::config::{ConfigFile, Effective};
use crate::error::CliError;
use crate::output::{fmt_f, OutDir};

pub struct Context {
    pub file: ConfigFile,
    pub effective: Effective,
    pub out: OutDir,
}

impl Context {
    fn population(&self) -> &PopulationConfig {
        &self.effective.population
    }

    fn summary_head(&self) -> String {
        format!(
            "command: {}\nconfig_hash: {}\nseed: {}\n\n",
            self.effective.command, self.effective.config_hash, self.effective.seed
        )
    }

    fn pool(&self) -> Result<NamePool, CliError> {
        Ok(self.population().validate()?.pool)
    }
}

fn client(file: &ConfigFile) -> Result<Arc<Client>, CliError> {
    let mock = file.probe.as_ref().and_then(|p| p.mock_reply.clone());
    match (mock, &file.endpoint) {
        (Some(reply), endpoint) => {
            let config = endpoint.clone().unwrap_or_else(|| ClientConfig::new("mock:", "mock"));
            Ok(Arc::new(Client::new(config, MockEndpoint::fixed(reply))))
        }
        (None, Some(endpoint)) => Ok(Arc::new(Client::http(endpoint.clone()))),
        (None, None) => Err(CliError::Config("an [endpoint] section is required for external-model agents".into())),
    }
}

fn uses_external(cfg: &PopulationConfig) -> bool {
    let external = |k: PolicyKind| k == PolicyKind::ExternalModel;
    cfg.policy.as_ref().is_some_and(|p| external(p.kind)) || cfg.policy_mix.iter().any(|r| external(r.policy.kind))
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.population();
    let state = if uses_external(cfg) {
        let binder = ExternalBinder { client: client(&ctx.file)?, template: ctx.file.template.clone() };
        init_population_with(cfg, &binder)?
    } else {
        init_population_with(cfg, &BuiltinPolicies)?
    };
    let mut traj = run_to_completion(state).map_err(|e| CliError::from(convention_lab::engine::SimError::from(e)))?;
    traj.config_hash = ctx.out.hash().to_string();
    ctx.out.with("trajectory.jsonl", |w| traj.write_jsonl(w))?;

    let mut s = ctx.summary_head();
    writeln!(s, "agents: {}", traj.agents).unwrap();
    writeln!(s, "steps: {}", traj.steps.len()).unwrap();
    match traj.consensus_step {
        Some(t) => writeln!(s, "consensus: {} at step {t}", traj.winner_label().unwrap_or("?")).unwrap(),
        None => writeln!(s, "consensus: not reached").unwrap(),
    }
    ctx.out.text("summary.txt", &s)
}

pub fn bias(ctx: &Context) -> Result<(), CliError> {
    let h = bias_assay(ctx.population(), ctx.file.experiment.runs)?;
    let rows: Vec<Vec<String>> =
        h.labels.iter().zip(&h.counts).map(|(l, c)| vec![l.clone(), c.to_string()]).collect();
    ctx.out.csv("winners.csv", &["name", "count"], &rows)?;

    let mut s = ctx.summary_head();
    writeln!(s, "runs: {}\nnon_converged: {}\n", h.runs, h.non_converged).unwrap();
    writeln!(s, "{:<12} {:>8} {:>10}", "name", "count", "share").unwrap();
    for (label, count) in h.labels.iter().zip(&h.counts) {
        writeln!(s, "{:<12} {:>8} {:>10}", label, count, fmt_f(h.frequency(label).unwrap_or(0.0))).unwrap();
    }
    match (h.p_uniform, h.method) {
        (Some(p), Some(m)) => writeln!(s, "\nuniformity p-value: {p:.6e} ({m:?})").unwrap(),
        _ => writeln!(s, "\nuniformity p-value: n/a (no converged runs)").unwrap(),
    }
    ctx.out.text("summary.txt", &s)
}

pub fn probe_individual(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.population();
    let pool = ctx.pool()?;
    let params = cfg.policy.clone().unwrap_or_else(|| cfg.default_policy());
    let probe = individual_bias_probe(&params, &pool, ctx.file.experiment.samples, cfg.seed)?;
    let rows: Vec<Vec<String>> =
        probe.labels.iter().zip(&probe.counts).map(|(l, c)| vec![l.clone(), c.to_string()]).collect();
    ctx.out.csv("first_choices.csv", &["name", "count"], &rows)?;

    let mut s = ctx.summary_head();
    writeln!(s, "samples: {}\n", probe.samples).unwrap();
    for (label, count) in probe.labels.iter().zip(&probe.counts) {
        writeln!(s, "{:<12} {:>8} {:>10}", label, count, fmt_f(probe.frequency(label).unwrap_or(0.0))).unwrap();
    }
    writeln!(s, "\nuniformity p-value: {:.6e} ({:?})", probe.p_uniform, probe.method).unwrap();
    ctx.out.text("summary.txt", &s)
}

pub fn tipping(ctx: &Context) -> Result<(), CliError> {
    let exp = &ctx.file.experiment;
    let settings = TippingSettings {
        bootstrap_resamples: exp.bootstrap_resamples,
        theta: exp.theta,
        ..TippingSettings::new(exp.challenger.clone(), exp.p_grid.clone(), exp.runs)
    };
    let curve = tipping_scan(ctx.population(), &settings)?;
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| vec![fmt_f(p.p), fmt_f(p.takeover_freq()), p.runs.to_string()])
        .collect();
    ctx.out.csv("tipping.csv", &["p", "takeover", "runs"], &rows)?;

    let mut s = ctx.summary_head();
    writeln!(s, "challenger: {}\n", settings.challenger).unwrap();
    writeln!(s, "{:>8} {:>9} {:>9} {:>9} {:>9}", "p", "committed", "takeover", "stderr", "switches").unwrap();
    for p in &curve.points {
        writeln!(
            s,
            "{:>8.3} {:>9} {:>9.3} {:>9.3} {:>9}",
            p.p,
            p.committed,
            p.takeover_freq(),
            p.std_error(),
            p.switch_runs
        )
        .unwrap();
    }
    match (curve.p_c_hat, curve.ci) {
        (Some(pc), Some((lo, hi))) => writeln!(s, "\np_c: {pc:.4} (95% bootstrap CI {lo:.4} to {hi:.4})").unwrap(),
        (Some(pc), None) => writeln!(s, "\np_c: {pc:.4} (no bootstrap CI)").unwrap(),
        _ => writeln!(s, "\np_c: not identified on this grid").unwrap(),
    }
    ctx.out.text("summary.txt", &s)
}

pub fn scaling(ctx: &Context) -> Result<(), CliError> {
    let exp = &ctx.file.experiment;
    let report = convergence_scan(ctx.population(), &exp.n_list, exp.runs)?;
    let opt = |x: Option<f64>| x.map(fmt_f).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| vec![p.n.to_string(), opt(p.median()), opt(p.mean())])
        .collect();
    ctx.out.csv("scaling.csv", &["N", "median_t", "mean_t"], &rows)?;

    let mut s = ctx.summary_head();
    writeln!(s, "{:>8} {:>12} {:>12} {:>14}", "N", "median_t", "mean_t", "non_converged").unwrap();
    for p in &report.points {
        writeln!(
            s,
            "{:>8} {:>12.1} {:>12.1} {:>14}",
            p.n,
            p.median().unwrap_or(f64::NAN),
            p.mean().unwrap_or(f64::NAN),
            p.non_converged
        )
        .unwrap();
    }
    writeln!(s, "\nexponent: {:.4} +/- {:.4}", report.slope, report.slope_se).unwrap();
    ctx.out.text("summary.txt", &s)
}

pub fn probe_meta(ctx: &Context) -> Result<(), CliError> {
    let client = client(&ctx.file)?;
    let pool = ctx.pool()?;
    let settings = ctx.file.probe.clone().unwrap_or_default().settings();
    let agent = AgentState::new(0, ctx.population().memory, PolicyTag::ExternalModel);
    let transcript = meta_probe(&client, &agent, &pool, &ctx.file.template, &settings)
        .map_err(|e| CliError::Config(e.to_string()))?;
    ctx.out.with("transcript.jsonl", |w| transcript.write_jsonl(w))?;

    let mut s = ctx.summary_head();
    writeln!(s, "model: {}\nresponses: {}\n", transcript.model_id, transcript.entries.len()).unwrap();
    for (name, stance) in [("single", Stance::Single), ("population", Stance::Population), ("unclear", Stance::Unclear)] {
        writeln!(s, "{:<12} {:>4}", name, transcript.stance_count(stance)).unwrap();
    }
    let failures: Vec<&str> = transcript.errors().collect();
    if !failures.is_empty() {
        writeln!(s, "\nincomplete: {} failed requests", failures.len()).unwrap();
    }
    ctx.out.text("summary.txt", &s)?;
    match failures.first() {
        Some(first) => Err(CliError::Transport(format!("{} probe requests failed; first: {first}", failures.len()))),
        None => Ok(()),
    }
}
