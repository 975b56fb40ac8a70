//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/support/decision_tree.rs"]
mod decision_tree;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use convention_lab::engine::{
    init_population_with, run_simulation, run_to_completion, AgentState, ConventionId, Init,
    InteractionRecord, Memory, NamePool, PolicyTag, PoolSpec, PopulationConfig, Trajectory,
};
use convention_lab::experiments::{
    bias_assay, convergence_scan, run_batch, strong_bias_params, switch_assay, tipping_scan, TippingSettings,
    DEFAULT_THETA, STRONG_BIAS_EPSILON,
};
use convention_lab::llm_adapter::{
    denylist_violation, meta_probe, parse_history, render_prompt, Client, ClientConfig, ExternalBinder,
    MockEndpoint, ProbeSettings, PromptTemplate, Stance,
};
use convention_lab::policies::{memory_choose, MemoryRule, PolicyParams};
use decision_tree::{binned, consensus_time_distribution, total_variation};

const C1_RUNTIME: Duration = Duration::from_secs(10);
const C2_SLOPE: (f64, f64) = (1.25, 1.75);
const C2_RUNTIME: Duration = Duration::from_secs(120);
const C3_TV: f64 = 0.01;
const C3_TREE_DEPTH: usize = 10;
const C4_ALPHA: f64 = 0.01;
const C5_MIN_FREQ: f64 = 0.6;
const C5_ALPHA: f64 = 0.01;
const C6_SE_SLACK: f64 = 2.0;
const C6_MAX_AT_ZERO: f64 = 0.02;
const C6_MIN_AT_HALF: f64 = 0.95;
const C6_RUNTIME: Duration = Duration::from_secs(300);
const C7_MIN_BIASED: f64 = 0.5;
const C7_MAX_UNBIASED: f64 = 0.02;
const C11_STATES: usize = 1000;

/// Population size for the memory-coordination criteria.
const AGENTS: usize = 24;
const STEPS: u64 = 20_000;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_consensus_emergence() -> Verdict {
    let start = Instant::now();
    let times = run_batch(&PopulationConfig::minimal_ng(100).with_seed(1), 50, |_, t| t.consensus_step)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let converged = times.iter().flatten().count();
    ensure(
        converged == 50 && elapsed < C1_RUNTIME,
        format!("{converged}/50 converged in {:.2}s (limit {}s)", elapsed.as_secs_f64(), C1_RUNTIME.as_secs()),
    )
}

fn c2_convergence_scaling() -> Verdict {
    let start = Instant::now();
    let report = convergence_scan(&PopulationConfig::minimal_ng(2).with_seed(2), &[50, 100, 200, 400], 50)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (lo, hi) = C2_SLOPE;
    ensure(
        (lo..=hi).contains(&report.slope) && report.non_converged() == 0 && elapsed < C2_RUNTIME,
        format!(
            "slope {:.3} +/- {:.3} (range [{lo}, {hi}]), {} non-converged, {:.1}s",
            report.slope,
            report.slope_se,
            report.non_converged(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c3_small_population_oracle() -> Verdict {
    let pair = run_batch(&PopulationConfig::minimal_ng(2).with_seed(3), 1000, |_, t| t.consensus_step)
        .map_err(|e| e.to_string())?;
    let all_two = pair.iter().all(|t| *t == Some(2));
    let exact = consensus_time_distribution(4, C3_TREE_DEPTH);
    let times = run_batch(&PopulationConfig::minimal_ng(4).with_seed(404), 100_000, |_, t| t.consensus_step)
        .map_err(|e| e.to_string())?;
    let tv = total_variation(&exact, &binned(&times, C3_TREE_DEPTH));
    ensure(all_two && tv < C3_TV, format!("N=2 all at step 2: {all_two}; N=4 total variation {tv:.4} (< {C3_TV})"))
}

fn c4_label_symmetry() -> Verdict {
    let base = PopulationConfig::memory_coordination(AGENTS, 2).with_seed(3);
    let h = bias_assay(&base, 500).map_err(|e| e.to_string())?;
    let p = h.p_uniform.ok_or("no converged runs")?;
    let reversed = PopulationConfig { pool: PoolSpec::Labels(vec!["B".into(), "A".into()]), ..base };
    let r = bias_assay(&reversed, 500).map_err(|e| e.to_string())?;
    let permuted = r.count("A") == h.count("B") && r.count("B") == h.count("A") && r.non_converged == h.non_converged;
    ensure(
        p > C4_ALPHA && permuted,
        format!("counts {:?}, p = {p:.3} (> {C4_ALPHA}); reversed labels give {:?}", h.counts, r.counts),
    )
}

fn c5_injected_bias() -> Verdict {
    let mut cfg = PopulationConfig::memory_coordination(AGENTS, 2).with_seed(4);
    cfg.policy = Some(PolicyParams::memory().with_pseudo_count("A", 0.5));
    let h = bias_assay(&cfg, 500).map_err(|e| e.to_string())?;
    let freq = h.frequency("A").ok_or("no converged runs")?;
    let p = h.p_uniform.ok_or("no converged runs")?;
    ensure(
        freq > C5_MIN_FREQ && p < C5_ALPHA,
        format!("A wins {freq:.3} (> {C5_MIN_FREQ}), p = {p:.2e} (< {C5_ALPHA})"),
    )
}

fn seeded_at_a(seed: u64) -> PopulationConfig {
    let mut cfg = PopulationConfig::memory_coordination(AGENTS, 2).with_seed(seed);
    cfg.init = Init::SeededConsensus("A".into());
    cfg.max_steps = Some(STEPS);
    cfg
}

fn c6_tipping_curve() -> Verdict {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.05).collect();
    let curve = tipping_scan(&seeded_at_a(6), &TippingSettings::new("B", grid, 100)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let pts = &curve.points;
    let monotone = pts.windows(2).all(|w| {
        let slack = C6_SE_SLACK * (w[0].std_error().powi(2) + w[1].std_error().powi(2)).sqrt();
        w[1].takeover_freq() >= w[0].takeover_freq() - slack
    });
    let at_zero = pts.first().map_or(1.0, |p| p.takeover_freq());
    let at_half = pts.last().map_or(0.0, |p| p.takeover_freq());
    let finite = curve.p_c_hat.is_some_and(f64::is_finite)
        && curve.ci.is_some_and(|(lo, hi)| lo.is_finite() && hi.is_finite());
    let freqs: Vec<String> = pts.iter().map(|p| format!("{:.2}", p.takeover_freq())).collect();
    ensure(
        monotone && at_zero <= C6_MAX_AT_ZERO && at_half >= C6_MIN_AT_HALF && finite && elapsed < C6_RUNTIME,
        format!(
            "takeover [{}], monotone {monotone}, p_c {} CI {}, {:.1}s",
            freqs.join(" "),
            curve.p_c_hat.map_or("none".into(), |p| format!("{p:.4}")),
            curve.ci.map_or("none".into(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]")),
            elapsed.as_secs_f64()
        ),
    )
}

fn c7_spontaneous_switching() -> Verdict {
    let biased = PopulationConfig { policy: Some(strong_bias_params("B")), ..seeded_at_a(7) };
    let unbiased =
        PopulationConfig { policy: Some(PolicyParams::memory().with_epsilon(STRONG_BIAS_EPSILON)), ..seeded_at_a(7) };
    let b = switch_assay(&biased, 100, DEFAULT_THETA).map_err(|e| e.to_string())?;
    let u = switch_assay(&unbiased, 100, DEFAULT_THETA).map_err(|e| e.to_string())?;
    ensure(
        b.rate() > C7_MIN_BIASED && u.rate() <= C7_MAX_UNBIASED,
        format!(
            "switch rate {:.2} biased (> {C7_MIN_BIASED}), {:.2} unbiased (<= {C7_MAX_UNBIASED})",
            b.rate(),
            u.rate()
        ),
    )
}

const CLI_CONFIG: &str = r#"
[population]
n = 10
pool = 2
dynamics = "memory-coordination"
seed = 8
max_steps = 4000

[experiment]
runs = 8
samples = 500
p_grid = [0.0, 0.2, 0.5]
n_list = [4, 8, 16]

[probe]
repetitions = 2
mock_reply = "There is one other player."
"#;

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c8_determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let memory = tmp.path().join("memory.toml");
    fs::write(&memory, CLI_CONFIG).unwrap();
    let seeded = tmp.path().join("seeded.toml");
    fs::write(&seeded, CLI_CONFIG.replace("seed = 8", "seed = 8\ninit = { seeded-consensus = \"A\" }")).unwrap();
    let ng = tmp.path().join("ng.toml");
    fs::write(&ng, CLI_CONFIG.replace("pool = 2\ndynamics = \"memory-coordination\"", "dynamics = \"minimal-ng\"")).unwrap();

    let jobs = [
        ("simulate", &memory),
        ("bias-assay", &memory),
        ("probe-individual", &memory),
        ("tipping-scan", &seeded),
        ("scaling-scan", &ng),
        ("meta-probe", &memory),
    ];
    let mut files = 0;
    for (command, config) in jobs {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let out = tmp.path().join(format!("{command}-{round}"));
            let status = Command::new(env!("CARGO_BIN_EXE_convlab"))
                .args([command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{command} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(dir_bytes(&out));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{command} outputs differ between runs"));
        }
        files += outputs[0].len();
    }
    Ok(format!("6 subcommands twice each, {files} output files byte-identical"))
}

/// Mock model that replays the unbiased memory rule from the rendered history.
fn scripted_client(pool_size: usize, memory: usize) -> Arc<Client> {
    let pool = NamePool::with_size(pool_size).unwrap();
    let rule = MemoryRule::unbiased(pool_size);
    let endpoint = MockEndpoint::new(move |req| {
        let mut mem = Memory::new(memory);
        for (own, partner, _) in parse_history(req.user_text()) {
            mem.push(InteractionRecord::new(0, pool.id(&own).unwrap(), pool.id(&partner).unwrap(), (1, -1)));
        }
        let pick: ConventionId = memory_choose(&mem, &rule, req.seed.unwrap_or_default());
        Ok(format!("{{'value': '{}'; 'reason': 'scripted'}}", pool.label(pick)))
    });
    Arc::new(Client::new(ClientConfig::new("mock://", "scripted"), endpoint))
}

fn blank_hash(traj: &Trajectory) -> String {
    let mut t = traj.clone();
    t.config_hash.clear();
    t.to_jsonl()
}

fn c9_adapter_equivalence() -> Verdict {
    let (n, w, m) = (10, 3, 5);
    for seed in 0..10 {
        let simulated = run_simulation(&PopulationConfig::memory_coordination(n, w).with_seed(seed))
            .map_err(|e| e.to_string())?;
        let cfg = PopulationConfig { policy: Some(PolicyParams::external()), ..PopulationConfig::memory_coordination(n, w) }
            .with_seed(seed);
        let binder = ExternalBinder {
            client: scripted_client(w, m),
            template: PromptTemplate { memory_render_limit: m, shuffle_seed: seed, ..PromptTemplate::default() },
        };
        let state = init_population_with(&cfg, &binder).map_err(|e| e.to_string())?;
        let external = run_to_completion(state).map_err(|e| e.to_string())?;
        if blank_hash(&external) != blank_hash(&simulated) {
            return Err(format!("seed {seed}: trajectories differ"));
        }
    }
    Ok("10 seeds byte-identical (N=10, W=3)".into())
}

fn c10_meta_probe() -> Verdict {
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/stance");
    let pool = NamePool::with_size(2).unwrap();
    let agent = AgentState::new(0, 5, PolicyTag::ExternalModel);
    let mut single = 0;
    let mut total = 0;
    for model in ["llama-3.1-70b", "claude-3-opus", "gpt-4.1"] {
        let text = fs::read_to_string(format!("{fixtures}/{model}.txt")).map_err(|e| e.to_string())?;
        let client = Client::new(ClientConfig::new("mock://", model), MockEndpoint::fixed(text));
        let t = meta_probe(&client, &agent, &pool, &PromptTemplate::default(), &ProbeSettings::default())
            .map_err(|e| e.to_string())?;
        if t.incomplete() {
            return Err(format!("{model}: incomplete transcript"));
        }
        single += t.stance_count(Stance::Single);
        total += t.entries.len();
    }
    ensure(single == 15 && total == 15, format!("{single}/{total} classified single"))
}

fn random_state(rng: &mut ChaCha8Rng) -> (AgentState, NamePool, PromptTemplate) {
    let w = rng.gen_range(2..30);
    let m = rng.gen_range(1..8);
    let win = rng.gen_range(1..5);
    let loss = rng.gen_range(-5..1);
    let pool = NamePool::with_size(w).unwrap();
    let mut agent = AgentState::new(rng.gen_range(0..500), m, PolicyTag::ExternalModel);
    for step in 0..rng.gen_range(0..=m) {
        let own = ConventionId(rng.gen_range(0..w as u32));
        let partner = ConventionId(rng.gen_range(0..w as u32));
        agent.memory.push(InteractionRecord::new(step as u64 + 1, own, partner, (win, loss)));
    }
    let template = PromptTemplate {
        memory_render_limit: rng.gen_range(0..10),
        payoffs: (win, loss),
        shuffle_seed: rng.gen(),
        ..PromptTemplate::default()
    };
    (agent, pool, template)
}

fn c11_prompt_hygiene() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..C11_STATES {
        let (agent, pool, template) = random_state(&mut rng);
        let first = render_prompt(&agent, &pool, &template).map_err(|e| format!("state {i}: {e}"))?;
        if let Some(term) = denylist_violation(&first) {
            return Err(format!("state {i}: prompt mentions {term:?}"));
        }
        if render_prompt(&agent, &pool, &template).map_err(|e| e.to_string())? != first {
            return Err(format!("state {i}: re-render differs"));
        }
    }
    Ok(format!("{C11_STATES} random states clean and byte-stable"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("consensus emergence", c1_consensus_emergence),
        ("convergence scaling", c2_convergence_scaling),
        ("small-population oracle", c3_small_population_oracle),
        ("label symmetry", c4_label_symmetry),
        ("injected bias", c5_injected_bias),
        ("tipping curve", c6_tipping_curve),
        ("spontaneous switching", c7_spontaneous_switching),
        ("determinism", c8_determinism),
        ("adapter equivalence", c9_adapter_equivalence),
        ("meta-probe pipeline", c10_meta_probe),
        ("prompt hygiene", c11_prompt_hygiene),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let verdict = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match verdict {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/11 passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
