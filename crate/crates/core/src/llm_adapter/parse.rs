use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use crate::engine::{ConventionId, NamePool};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no unique choice in response {raw:?}")]
pub struct ParseError {
    pub raw: String,
}

/// Extracts the chosen label from a model reply.
///
/// Rungs, tried in order until one yields exactly one label:
/// the whole reply is a label; exactly one label occurs as a standalone
/// word; exactly one label follows an answer marker (`value:`, `answer:`,
/// `choice:`) or, failing that, sits alone inside quotes.
pub fn parse_choice(text: &str, pool: &NamePool) -> Result<ConventionId, ParseError> {
    let labels = pool.fixed_labels();
    let lookup = |s: &str| labels.iter().position(|l| l == s).map(|i| ConventionId(i as u32));

    let bare = text.trim().trim_matches(|c: char| !c.is_alphanumeric());
    if let Some(id) = lookup(bare) {
        return Ok(id);
    }

    let words: BTreeSet<ConventionId> = text
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter_map(lookup)
        .collect();
    if let Some(id) = single(&words) {
        return Ok(id);
    }

    let marked: BTreeSet<ConventionId> = marker_re()
        .captures_iter(text)
        .filter_map(|c| lookup(&c[1]))
        .collect();
    if let Some(id) = single(&marked) {
        return Ok(id);
    }
    let quoted: BTreeSet<ConventionId> = quote_re()
        .captures_iter(text)
        .filter_map(|c| c.iter().skip(1).flatten().next().and_then(|m| lookup(m.as_str().trim())))
        .collect();
    single(&quoted).ok_or_else(|| ParseError { raw: text.to_string() })
}

fn single(set: &BTreeSet<ConventionId>) -> Option<ConventionId> {
    match set.len() {
        1 => set.iter().next().copied(),
        _ => None,
    }
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)['"]?\b(?:value|answer|choice)['"]?\s*[:=]\s*['"‘“]?([^\s'"’”;,}]+)"#).unwrap()
    })
}

fn quote_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"'([^'\n]+)'|"([^"\n]+)"|‘([^’\n]+)’|“([^”\n]+)”"#).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fj() -> NamePool {
        NamePool::new(vec!["F".to_string(), "J".to_string()]).unwrap()
    }

    #[test]
    fn exact_token() {
        assert_eq!(parse_choice("F", &fj()), Ok(ConventionId(0)));
        assert_eq!(parse_choice("  'J'.\n", &fj()), Ok(ConventionId(1)));
    }

    #[test]
    fn sentence_with_one_label() {
        assert_eq!(parse_choice("I will choose 'J' again.", &fj()), Ok(ConventionId(1)));
    }

    #[test]
    fn ambiguous_reply_is_an_error() {
        let err = parse_choice("F or J, hard to say", &fj()).unwrap_err();
        assert_eq!(err.raw, "F or J, hard to say");
    }

    #[test]
    fn marker_disambiguates() {
        let text = "{'value': 'J'; 'reason': 'F failed last round'}";
        assert_eq!(parse_choice(text, &fj()), Ok(ConventionId(1)));
        assert_eq!(parse_choice("F lost before, so answer: J", &fj()), Ok(ConventionId(1)));
    }

    #[test]
    fn quotes_disambiguate_letter_words() {
        let pool = NamePool::with_size(26).unwrap();
        // "I" and "A" are both labels; only the quoted one counts.
        let text = "I think A good pick is 'Q' here";
        assert_eq!(parse_choice(text, &pool), Ok(pool.id("Q").unwrap()));
    }

    #[test]
    fn labels_are_case_sensitive() {
        assert!(parse_choice("f or j", &fj()).is_err());
    }
}
