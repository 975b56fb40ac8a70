use std::io::{self, Write};

use serde::Serialize;

use super::agent::AgentId;
use super::names::ConventionId;

/// One pairwise interaction as seen from outside the agents. Under the
/// minimal naming game `a` is the speaker and `choice_b` is only present when
/// the listener recognised the spoken name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub step: u64,
    pub a: AgentId,
    pub b: AgentId,
    pub choice_a: ConventionId,
    pub choice_b: Option<ConventionId>,
    pub success: bool,
}

impl StepRecord {
    /// The name both agents agreed on, if the step succeeded.
    pub fn agreed(&self) -> Option<ConventionId> {
        self.success.then_some(self.choice_a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub config_hash: String,
    pub agents: usize,
    /// Labels for every id that appears in the run, invented ones included.
    pub labels: Vec<String>,
    pub committed_present: bool,
    /// Consensus status of the initial population, before any step.
    pub initial_consensus: Option<ConventionId>,
    pub steps: Vec<StepRecord>,
    /// Names present in any inventory after each step.
    pub distinct_names: Vec<u32>,
    /// Name the whole population is settled on after each step, if any.
    pub consensus: Vec<Option<ConventionId>>,
    /// First step of the first consensus stretch confirmed by a full sweep.
    pub consensus_step: Option<u64>,
    pub winner: Option<ConventionId>,
}

#[derive(Serialize)]
struct Header<'a> {
    config_hash: &'a str,
    seed: u64,
    agents: usize,
    steps: usize,
    consensus_step: Option<u64>,
    winner: Option<&'a str>,
}

#[derive(Serialize)]
struct Line<'a> {
    step: u64,
    a: AgentId,
    b: AgentId,
    choice_a: &'a str,
    choice_b: Option<&'a str>,
    success: bool,
}

impl Trajectory {
    pub fn label(&self, id: ConventionId) -> &str {
        &self.labels[id.index()]
    }

    pub fn sweep_len(&self) -> usize {
        (self.agents / 2).max(1)
    }

    pub fn winner_label(&self) -> Option<&str> {
        self.winner.map(|w| self.label(w))
    }

    /// Header object followed by one object per step.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header = Header {
            config_hash: &self.config_hash,
            seed: self.seed,
            agents: self.agents,
            steps: self.steps.len(),
            consensus_step: self.consensus_step,
            winner: self.winner_label(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for s in &self.steps {
            let line = Line {
                step: s.step,
                a: s.a,
                b: s.b,
                choice_a: self.label(s.choice_a),
                choice_b: s.choice_b.map(|c| self.label(c)),
                success: s.success,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("json is utf-8")
    }
}
