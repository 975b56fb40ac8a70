use std::io::{self, Write};
use std::sync::OnceLock;
use std::thread;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::client::{Client, ClientError};
use super::prompt::{render_prompt, PromptTemplate, TemplateError};
use crate::engine::{AgentState, NamePool};

pub const QUESTION_THEORY: &str = "Does this setup remind you of any existing model or theory in social science?";
pub const QUESTION_OPTIMAL_MOVE: &str = "Tell me if you know what the optimal move is after a success.";
pub const QUESTION_CONVERGENCE: &str = "Finally, tell me how you think the game will converge globally.";
pub const QUESTION_OPPONENT: &str =
    "Finally, do you think that you are playing against a single player or a whole population?";

/// Question groups sent by default: one message ending on the opponent
/// question.
pub fn default_question_groups() -> Vec<Vec<String>> {
    vec![vec![
        QUESTION_THEORY.to_string(),
        QUESTION_OPTIMAL_MOVE.to_string(),
        QUESTION_OPPONENT.to_string(),
    ]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Single,
    Population,
    Unclear,
}

struct Cues {
    single: Regex,
    population: Regex,
    undecided: Regex,
    hypothetical: Regex,
    negator: Regex,
    sentence_end: Regex,
    clause_break: Regex,
}

fn cues() -> &'static Cues {
    static CUES: OnceLock<Cues> = OnceLock::new();
    CUES.get_or_init(|| Cues {
        single: Regex::new(
            r"(?i)\b(?:single(?:\s+other)?\s+(?:player|opponent|partner|agent|person|counterpart)|one\s+(?:other\s+)?(?:player|opponent|partner|agent|person)|(?:same|fixed)\s+(?:player|opponent|partner)|player\s*2|two[-\s]player|two\s+players|both\s+players|one[-\s]on[-\s]one|head[-\s]to[-\s]head)\b",
        )
        .unwrap(),
        population: Regex::new(
            r"(?i)\b(?:populations?|communit(?:y|ies)|different\s+(?:opponents?|partners?|players?)|(?:many|multiple|several|various)\s+(?:other\s+)?(?:players|opponents|partners|agents|people)|random(?:ly\s+(?:drawn|chosen|selected|paired|matched))?\s+(?:opponents?|partners?|players?|members?)|randomly\s+(?:drawn|chosen|selected|paired|matched)|group\s+of\s+(?:players|agents|people)|new\s+(?:opponent|partner)\s+each)\b",
        )
        .unwrap(),
        undecided: Regex::new(r"(?i)\b(?:could\s+be\s+either|either\s+way|hard\s+to\s+say|can(?:not|'t)\s+tell|unclear|not\s+sure)\b").unwrap(),
        hypothetical: Regex::new(r"(?i)\b(?:if|would|might|were)\b").unwrap(),
        negator: Regex::new(r"(?i)\b(?:not|no|never|nor|rather\s+than|instead\s+of|without)\b").unwrap(),
        sentence_end: Regex::new(r"[.!?*\n]+(?:\s+|$)").unwrap(),
        clause_break: Regex::new(r"[,;:()]|\bbut\b").unwrap(),
    })
}

/// Counts cue matches that are neither negated within their clause nor part
/// of a hypothetical sentence.
fn asserted(re: &Regex, sentence: &str, c: &Cues) -> usize {
    re.find_iter(sentence)
        .filter(|m| {
            let before = &sentence[..m.start()];
            let clause_start = c.clause_break.find_iter(before).last().map_or(0, |b| b.end());
            !c.negator.is_match(&before[clause_start..])
        })
        .count()
}

/// Rule-based reading of whether a reply says the game is against one
/// partner or a population.
pub fn classify_stance(text: &str) -> Stance {
    let c = cues();
    let (mut single, mut population, mut undecided) = (0, 0, 0);
    for sentence in c.sentence_end.split(text).filter(|s| !s.trim().is_empty()) {
        if c.hypothetical.is_match(sentence) {
            continue;
        }
        single += asserted(&c.single, sentence, c);
        population += asserted(&c.population, sentence, c);
        undecided += asserted(&c.undecided, sentence, c);
    }
    match (single > 0, population > 0) {
        _ if undecided > 0 => Stance::Unclear,
        (true, false) => Stance::Single,
        (false, true) => Stance::Population,
        _ => Stance::Unclear,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_question_groups")]
    pub question_groups: Vec<Vec<String>>,
}

fn default_repetitions() -> usize {
    5
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings { repetitions: default_repetitions(), question_groups: default_question_groups() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub model_id: String,
    pub question: String,
    pub repetition: usize,
    pub raw_text: Option<String>,
    pub stance: Option<Stance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTranscript {
    pub model_id: String,
    pub question_groups: Vec<Vec<String>>,
    pub repetitions: usize,
    /// Ordered by question group, then repetition.
    pub entries: Vec<ProbeEntry>,
}

impl ProbeTranscript {
    pub fn incomplete(&self) -> bool {
        self.entries.iter().any(|e| e.error.is_some())
    }

    pub fn errors(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter_map(|e| e.error.as_deref())
    }

    pub fn stance_count(&self, stance: Stance) -> usize {
        self.entries.iter().filter(|e| e.stance == Some(stance)).count()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProbeError {
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Game prompt followed by the numbered questions of one group.
pub fn probe_message(game: &str, questions: &[String]) -> String {
    let mut msg = game.to_string();
    msg.push_str("\n\nBefore you answer, please also respond to the following.");
    for (i, q) in questions.iter().enumerate() {
        msg.push_str(&format!("\n{}. {}", i + 1, q));
    }
    msg
}

/// Sends the rendered game to the model with each question group,
/// `repetitions` times, and classifies the replies. Failed requests are
/// recorded in the transcript rather than aborting the probe.
pub fn meta_probe(
    client: &Client,
    agent: &AgentState,
    pool: &NamePool,
    template: &PromptTemplate,
    settings: &ProbeSettings,
) -> Result<ProbeTranscript, ProbeError> {
    if settings.repetitions == 0 {
        return Err(ProbeError::NoRepetitions);
    }
    let game = render_prompt(agent, pool, template)?;
    let jobs: Vec<(usize, usize)> = (0..settings.question_groups.len())
        .flat_map(|g| (0..settings.repetitions).map(move |r| (g, r)))
        .collect();
    let system = template.system_text.as_str();

    let results: Vec<Result<String, ClientError>> = thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(g, _)| {
                let message = probe_message(&game, &settings.question_groups[g]);
                s.spawn(move || {
                    let request = client.request(Some(system), &message, None);
                    client.send(&request).map(|c| c.text)
                })
            })
            .collect();
        // Join in correlation-id order.
        handles.into_iter().map(|h| h.join().expect("probe worker panicked")).collect()
    });

    let model_id = client.config().model.clone();
    let entries = jobs
        .into_iter()
        .zip(results)
        .map(|((g, r), result)| {
            let question = settings.question_groups[g].last().cloned().unwrap_or_default();
            match result {
                Ok(text) => ProbeEntry {
                    model_id: model_id.clone(),
                    question,
                    repetition: r + 1,
                    stance: Some(classify_stance(&text)),
                    raw_text: Some(text),
                    error: None,
                },
                Err(e) => ProbeEntry {
                    model_id: model_id.clone(),
                    question,
                    repetition: r + 1,
                    raw_text: None,
                    stance: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ProbeTranscript {
        model_id,
        question_groups: settings.question_groups.clone(),
        repetitions: settings.repetitions,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructed_population_replies() {
        assert_eq!(classify_stance("I face many different partners drawn from a community"), Stance::Population);
        assert_eq!(
            classify_stance("each round you meet a randomly drawn member of a large population"),
            Stance::Population
        );
    }

    #[test]
    fn undecided_and_empty_replies() {
        assert_eq!(classify_stance("it could be either"), Stance::Unclear);
        assert_eq!(classify_stance("No idea."), Stance::Unclear);
    }

    #[test]
    fn conflicting_cues_are_unclear() {
        assert_eq!(
            classify_stance("You play a single opponent. Over time you also face a whole population."),
            Stance::Unclear
        );
    }

    #[test]
    fn negated_population_is_not_a_cue() {
        assert_eq!(classify_stance("You face one opponent, not a population."), Stance::Single);
        assert_eq!(classify_stance("There is no sign of a community here; it is a two-player game."), Stance::Single);
    }

    #[test]
    fn hypotheticals_are_skipped() {
        assert_eq!(
            classify_stance("It is Player 2 alone. If this were a population game the rules would say so."),
            Stance::Single
        );
    }

    #[test]
    fn message_numbers_questions() {
        let msg = probe_message("GAME", &default_question_groups()[0]);
        assert!(msg.starts_with("GAME\n\n"));
        assert!(msg.ends_with(&format!("3. {QUESTION_OPPONENT}")));
    }
}
