//! Structured representations (SRs) of conversational questions.
//!
//! An SR is the four-slot, intent-explicit form of a question:
//! `context entity | question entity | relation | expected answer type`.
//! This module parses and serializes SRs, generates candidate SRs with a
//! rule-based baseline or from a gold file, and filters hallucinated
//! candidates against the conversation vocabulary.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize_word, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct StructuredRepresentation {
    pub context_entity: String,
    pub question_entity: String,
    pub relation: String,
    pub answer_type: String,
}

impl StructuredRepresentation {
    pub fn new(
        context_entity: impl Into<String>,
        question_entity: impl Into<String>,
        relation: impl Into<String>,
        answer_type: impl Into<String>,
    ) -> Result<Self> {
        let sr = Self {
            context_entity: context_entity.into(),
            question_entity: question_entity.into(),
            relation: relation.into(),
            answer_type: answer_type.into(),
        };
        if sr.context_entity.is_empty() && sr.question_entity.is_empty() && sr.relation.is_empty() {
            return Err(Error::EmptySr);
        }
        Ok(sr)
    }

    /// Slot texts joined by spaces, i.e. the SR without delimiters. This is
    /// the form used for BM25 queries and for encoding.
    pub fn flat_text(&self) -> String {
        [
            &self.context_entity,
            &self.question_entity,
            &self.relation,
            &self.answer_type,
        ]
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(" ")
    }

    /// Normalized tokens of every slot, in slot order.
    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.flat_text())
    }
}

/// Parses the `|`-delimited linear form. Slots are whitespace-trimmed.
pub fn parse_sr(text: &str) -> Result<StructuredRepresentation> {
    let found = text.matches('|').count();
    if found != 3 {
        return Err(Error::SrDelimiters { found });
    }
    let mut slots = text.split('|').map(str::trim);
    // exactly four pieces after the count check
    let (c, q, r, t) = (
        slots.next().unwrap(),
        slots.next().unwrap(),
        slots.next().unwrap(),
        slots.next().unwrap(),
    );
    StructuredRepresentation::new(c, q, r, t)
}

pub fn serialize_sr(sr: &StructuredRepresentation) -> String {
    format!(
        "{}|{}|{}|{}",
        sr.context_entity, sr.question_entity, sr.relation, sr.answer_type
    )
}

impl fmt::Display for StructuredRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_sr(self))
    }
}

impl FromStr for StructuredRepresentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_sr(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub question: String,
    /// Gold or predicted answer label, depending on the history mode.
    pub answer_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_entity_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_id(id: impl Into<String>) -> Self {
        Self {
            id: Some(id.into()),
            turns: Vec::new(),
        }
    }

    /// 1-based index the next question will receive.
    pub fn next_turn_number(&self) -> usize {
        self.turns.len() + 1
    }

    pub fn push(
        &mut self,
        question: impl Into<String>,
        answer_label: impl Into<String>,
        answer_entity_id: Option<String>,
    ) {
        self.turns.push(Turn {
            question: question.into(),
            answer_label: answer_label.into(),
            answer_entity_id,
        });
    }

    /// Normalized tokens over all questions and answers so far.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.turns
            .iter()
            .flat_map(|t| {
                tokenize(&t.question)
                    .into_iter()
                    .chain(tokenize(&t.answer_label))
            })
            .collect()
    }

    pub fn last_answer(&self) -> Option<&Turn> {
        self.turns.iter().rev().find(|t| !t.answer_label.is_empty())
    }
}

/// Result of hallucination filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSr {
    pub sr: StructuredRepresentation,
    /// 0-based rank of the chosen candidate.
    pub rank: usize,
    /// Set when every candidate contained a hallucinated word and the
    /// rank-1 candidate was returned anyway.
    pub all_hallucinated: bool,
}

/// Tokens of the SR slots that must be grounded in the conversation. The
/// answer-type slot is excluded.
fn checked_tokens(sr: &StructuredRepresentation) -> Vec<String> {
    [&sr.context_entity, &sr.question_entity, &sr.relation]
        .iter()
        .flat_map(|s| tokenize(s))
        .collect()
}

pub fn is_hallucinated(sr: &StructuredRepresentation, vocabulary: &BTreeSet<String>) -> bool {
    checked_tokens(sr).iter().any(|t| !vocabulary.contains(t))
}

/// Picks the highest-ranked candidate whose context, question and relation
/// tokens all occur in the conversation or the current question.
pub fn hallucination_filter(
    candidates: &[StructuredRepresentation],
    conversation: &Conversation,
    current_question: &str,
) -> Result<FilteredSr> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut vocabulary = conversation.vocabulary();
    vocabulary.extend(tokenize(current_question));
    for (rank, sr) in candidates.iter().enumerate() {
        if !is_hallucinated(sr, &vocabulary) {
            return Ok(FilteredSr {
                sr: sr.clone(),
                rank,
                all_hallucinated: false,
            });
        }
    }
    log::debug!(
        "all {} SR candidates hallucinated; keeping rank 1",
        candidates.len()
    );
    Ok(FilteredSr {
        sr: candidates[0].clone(),
        rank: 0,
        all_hallucinated: true,
    })
}

const AUXILIARY_VERBS: &[&str] = &[
    "is", "are", "was", "were", "do", "does", "did", "has", "have", "had", "can", "could", "will",
    "would", "should", "am",
];

/// Yes/no question heuristic: the first token is an auxiliary verb.
pub fn is_existential_question(question: &str) -> bool {
    question
        .split_whitespace()
        .find_map(normalize_word)
        .map(|w| AUXILIARY_VERBS.contains(&w.as_str()))
        .unwrap_or(false)
}

/// Source of ranked SR candidates for a question in context.
pub trait SrGenerator: Send + Sync {
    fn generate(
        &self,
        conversation: &Conversation,
        current_question: &str,
    ) -> Result<Vec<StructuredRepresentation>>;
}

/// Asks `generator` for candidates and keeps at most `k`.
pub fn generate_sr_candidates(
    generator: &dyn SrGenerator,
    conversation: &Conversation,
    current_question: &str,
    k: usize,
) -> Result<Vec<StructuredRepresentation>> {
    if k == 0 {
        return Err(Error::Config(
            "SR candidate count k must be at least 1".into(),
        ));
    }
    let mut out = generator.generate(conversation, current_question)?;
    out.truncate(k);
    Ok(out)
}

const PRONOUNS: &[&str] = &[
    "he", "she", "him", "her", "it", "they", "his", "its", "their",
];

const QUESTION_WORDS: &[&str] = &[
    "who", "whom", "whose", "what", "which", "when", "where", "why", "how", "name", "tell", "list",
    "give", "and", "in", "on", "the", "a", "an",
];

const SPAN_CONNECTORS: &[&str] = &[
    "and", "of", "the", "de", "von", "van", "der", "den", "da", "di", "du", "del", "la", "le", "&",
];

#[derive(Debug, Clone)]
struct Span {
    start: usize,
    end: usize,
    text: String,
}

fn is_capitalized(word: &str) -> bool {
    word.trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .next()
        .map(|c| c.is_uppercase())
        .unwrap_or(false)
}

fn ends_with_break(word: &str) -> bool {
    word.ends_with([',', ';', ':', '?', '!', '.'])
}

/// Maximal runs of capitalized words, allowing lowercase connectors between
/// two capitalized words. A sentence-initial question word never opens a span.
fn capitalized_spans(words: &[&str]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let starts = is_capitalized(words[i])
            && !(i == 0
                && normalize_word(words[i])
                    .map(|w| {
                        QUESTION_WORDS.contains(&w.as_str())
                            || AUXILIARY_VERBS.contains(&w.as_str())
                    })
                    .unwrap_or(false));
        if !starts {
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i + 1;
        let mut last_cap = i;
        while end < words.len() && !ends_with_break(words[end - 1]) {
            let w = words[end];
            if is_capitalized(w) {
                last_cap = end;
                end += 1;
            } else if SPAN_CONNECTORS.contains(&w.to_lowercase().as_str()) && !ends_with_break(w) {
                end += 1;
            } else {
                break;
            }
        }
        let end = last_cap + 1;
        let raw = words[start..end].join(" ");
        let text = raw
            .trim_matches(|c: char| !c.is_alphanumeric() && c != ')' && c != '(')
            .trim_end_matches('(')
            .to_string();
        spans.push(Span { start, end, text });
        i = end;
    }
    spans
}

fn relation_without(words: &[&str], span: Option<&Span>) -> String {
    let kept: Vec<&str> = words
        .iter()
        .enumerate()
        .filter(|(i, _)| span.map(|s| *i < s.start || *i >= s.end).unwrap_or(true))
        .map(|(_, w)| *w)
        .collect();
    let rel = kept
        .join(" ")
        .replace('|', " ")
        .trim_end_matches(|c: char| !c.is_alphanumeric())
        .trim()
        .to_string();
    rel
}

/// Deterministic rule-based SR generator.
///
/// Question entity: the answer to the previous turn if the question contains
/// a personal/possessive pronoun, else the longest capitalized span. Context
/// entity: the question entity of the first turn. Relation: the question with
/// the entity span removed. Answer type is left empty.
#[derive(Debug, Clone, Default)]
pub struct BaselineSrGenerator;

impl BaselineSrGenerator {
    fn question_entity_of(question: &str) -> Option<String> {
        let words: Vec<&str> = question.split_whitespace().collect();
        let spans = capitalized_spans(&words);
        longest(&spans).map(|s| s.text.clone())
    }
}

fn longest(spans: &[Span]) -> Option<&Span> {
    // first of the longest spans
    spans.iter().rev().max_by_key(|s| s.text.chars().count())
}

impl SrGenerator for BaselineSrGenerator {
    fn generate(
        &self,
        conversation: &Conversation,
        current_question: &str,
    ) -> Result<Vec<StructuredRepresentation>> {
        let words: Vec<&str> = current_question
            .split_whitespace()
            .filter(|w| !w.contains('|'))
            .collect();
        if words.is_empty() {
            return Err(Error::Generator("empty question".into()));
        }
        let mut spans = capitalized_spans(&words);
        spans.sort_by(|a, b| {
            b.text
                .chars()
                .count()
                .cmp(&a.text.chars().count())
                .then(a.start.cmp(&b.start))
        });

        let has_pronoun = tokenize(current_question)
            .iter()
            .any(|t| PRONOUNS.contains(&t.as_str()));
        let context = conversation
            .turns
            .first()
            .and_then(|t| Self::question_entity_of(&t.question))
            .unwrap_or_default();

        let mut candidates: Vec<(String, Option<&Span>)> = Vec::new();
        if has_pronoun {
            if let Some(prev) = conversation.last_answer() {
                candidates.push((prev.answer_label.clone(), None));
            }
        }
        for span in &spans {
            candidates.push((span.text.clone(), Some(span)));
        }
        if candidates.is_empty() {
            candidates.push((String::new(), None));
        }

        let mut out: Vec<StructuredRepresentation> = Vec::new();
        for (question_entity, span) in candidates {
            let mut relation = relation_without(&words, span);
            if relation.is_empty() {
                relation = relation_without(&words, None);
            }
            let question_entity = question_entity.replace('|', " ");
            let context = if context == question_entity {
                String::new()
            } else {
                context.replace('|', " ")
            };
            let sr = StructuredRepresentation::new(context, question_entity, relation, "")
                .map_err(|e| Error::Generator(e.to_string()))?;
            if !out.contains(&sr) {
                out.push(sr);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub(crate) enum IdValue {
    Str(String),
    Int(i64),
}

impl From<IdValue> for String {
    fn from(v: IdValue) -> Self {
        match v {
            IdValue::Str(s) => s,
            IdValue::Int(i) => i.to_string(),
        }
    }
}

/// Accepts a conversation id written as either a string or an integer.
pub(crate) fn deserialize_id<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<String, D::Error> {
    IdValue::deserialize(d).map(String::from)
}

#[derive(Debug, Deserialize)]
struct GoldSrRecord {
    conv_id: IdValue,
    turn: usize,
    sr: String,
}

/// Pass-through generator returning file-supplied SRs keyed by
/// (conversation id, 1-based turn). Missing keys go to `fallback` if set.
#[derive(Default)]
pub struct GoldSrGenerator {
    srs: HashMap<(String, usize), StructuredRepresentation>,
    fallback: Option<Box<dyn SrGenerator>>,
}

impl GoldSrGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fallback(mut self, fallback: Box<dyn SrGenerator>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn insert(
        &mut self,
        conv_id: impl Into<String>,
        turn: usize,
        sr: StructuredRepresentation,
    ) {
        self.srs.insert((conv_id.into(), turn), sr);
    }

    pub fn len(&self) -> usize {
        self.srs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.srs.is_empty()
    }

    /// Reads line-delimited `{conv_id, turn, sr}` records.
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut gen = Self::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record_err = |message: String| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let rec: GoldSrRecord =
                serde_json::from_str(&line).map_err(|e| record_err(e.to_string()))?;
            let sr = parse_sr(&rec.sr).map_err(|e| record_err(e.to_string()))?;
            gen.insert(String::from(rec.conv_id), rec.turn, sr);
        }
        Ok(gen)
    }
}

impl SrGenerator for GoldSrGenerator {
    fn generate(
        &self,
        conversation: &Conversation,
        current_question: &str,
    ) -> Result<Vec<StructuredRepresentation>> {
        let turn = conversation.next_turn_number();
        if let Some(id) = &conversation.id {
            if let Some(sr) = self.srs.get(&(id.clone(), turn)) {
                return Ok(vec![sr.clone()]);
            }
        }
        match &self.fallback {
            Some(f) => f.generate(conversation, current_question),
            None => Err(Error::Generator(format!(
                "no gold SR for conversation {:?}, turn {turn}",
                conversation.id
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn running_example() -> Conversation {
        let mut c = Conversation::new();
        c.push("Who wrote the book Angels and Demons?", "Dan Brown", None);
        c.push("the main character in his books?", "Robert Langdon", None);
        c
    }

    #[test]
    fn parses_four_slots() {
        let sr =
            parse_sr("Angels and Demons|Robert Langdon|who played him in the films|human").unwrap();
        assert_eq!(sr.context_entity, "Angels and Demons");
        assert_eq!(sr.question_entity, "Robert Langdon");
        assert_eq!(sr.relation, "who played him in the films");
        assert_eq!(sr.answer_type, "human");
    }

    #[test]
    fn parses_empty_slots_and_trims() {
        let sr = parse_sr("||x|").unwrap();
        assert_eq!(sr, StructuredRepresentation::new("", "", "x", "").unwrap());
        let sr = parse_sr(" a | b |c | d ").unwrap();
        assert_eq!(serialize_sr(&sr), "a|b|c|d");
    }

    #[test]
    fn wrong_delimiter_count_names_count() {
        let err = parse_sr("a|b|c").unwrap_err();
        assert!(matches!(err, Error::SrDelimiters { found: 2 }));
        assert!(err.to_string().contains("found 2"));
        assert!(matches!(
            parse_sr("a|b|c|d|e"),
            Err(Error::SrDelimiters { found: 4 })
        ));
        assert!(matches!(parse_sr("|||"), Err(Error::EmptySr)));
    }

    #[test]
    fn serializes_running_example() {
        let sr = StructuredRepresentation::new(
            "Angels and Demons",
            "Robert Langdon",
            "who played him in the films",
            "human",
        )
        .unwrap();
        assert_eq!(
            serialize_sr(&sr),
            "Angels and Demons|Robert Langdon|who played him in the films|human"
        );
        assert_eq!(
            serialize_sr(&StructuredRepresentation::new("", "", "r", "").unwrap()),
            "||r|"
        );
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(
            c in "[a-zA-Z0-9 ]{0,12}",
            q in "[a-zA-Z0-9 ]{0,12}",
            r in "[a-zA-Z0-9][a-zA-Z0-9 ]{0,12}",
            t in "[a-zA-Z0-9 ]{0,12}",
        ) {
            let sr = StructuredRepresentation::new(c.trim(), q.trim(), r.trim(), t.trim()).unwrap();
            prop_assert_eq!(parse_sr(&serialize_sr(&sr)).unwrap(), sr);
        }
    }

    #[test]
    fn rejects_de_niro_hallucination() {
        let conv = running_example();
        let bad = parse_sr("Dan Brown|Robert de Niro|who played him in the films|human").unwrap();
        let good =
            parse_sr("Angels and Demons|Robert Langdon|who played him in the films|human").unwrap();
        let out = hallucination_filter(&[bad, good.clone()], &conv, "who played him in the films?")
            .unwrap();
        assert_eq!(out.sr, good);
        assert_eq!(out.rank, 1);
        assert!(!out.all_hallucinated);
    }

    #[test]
    fn answer_type_slot_is_not_checked() {
        let conv = running_example();
        let sr = parse_sr("Angels and Demons|Robert Langdon|who played him|actor").unwrap();
        let out = hallucination_filter(
            std::slice::from_ref(&sr),
            &conv,
            "who played him in the films?",
        )
        .unwrap();
        assert_eq!(out.sr, sr);
        assert!(!out.all_hallucinated);
    }

    #[test]
    fn all_hallucinated_falls_back_to_first() {
        let conv = running_example();
        let a = parse_sr("Paris|Eiffel|height|").unwrap();
        let b = parse_sr("London|Big Ben|height|").unwrap();
        // "paris", "eiffel", "height", "london", "big", "ben" all absent
        let out = hallucination_filter(&[a.clone(), b], &conv, "how tall?").unwrap();
        assert_eq!(out.sr, a);
        assert!(out.all_hallucinated);
        assert!(matches!(
            hallucination_filter(&[], &conv, "x"),
            Err(Error::NoCandidates)
        ));
    }

    #[test]
    fn filter_and_vocabulary_share_normalization() {
        let mut conv = Conversation::new();
        conv.push("WHO wrote «Angels»?", "Dan-Brown!", None);
        let vocab = conv.vocabulary();
        let expected: BTreeSet<String> = tokenize("WHO wrote «Angels»? Dan-Brown!")
            .into_iter()
            .collect();
        assert_eq!(vocab, expected);
        let sr = parse_sr("|angels|who wrote|").unwrap();
        assert!(!is_hallucinated(&sr, &vocab));
    }

    proptest! {
        #[test]
        fn permuting_failing_candidates_keeps_result(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let conv = running_example();
            let q = "who played him in the films?";
            let failing = vec![
                parse_sr("X|Y|z|").unwrap(),
                parse_sr("Dan Brown|Robert de Niro|who played him|").unwrap(),
                parse_sr("|Nobody|what|").unwrap(),
            ];
            let passing = [parse_sr("Angels and Demons|Robert Langdon|who played him|").unwrap(),
                parse_sr("|Dan Brown|who wrote|").unwrap()];
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = failing.clone();
            shuffled.shuffle(&mut rng);
            // interleave failing candidates around the fixed passing order
            let mut cands = vec![shuffled[0].clone(), passing[0].clone(), shuffled[1].clone(), passing[1].clone(), shuffled[2].clone()];
            let out = hallucination_filter(&cands, &conv, q).unwrap();
            prop_assert_eq!(&out.sr, &passing[0]);
            prop_assert!(cands.contains(&out.sr));
            cands.reverse();
            let out = hallucination_filter(&cands, &conv, q).unwrap();
            prop_assert_eq!(&out.sr, &passing[1]);
        }
    }

    #[test]
    fn existential_heuristic() {
        assert!(is_existential_question("did tom hanks star in the movie?"));
        assert!(is_existential_question("Is it true?"));
        assert!(!is_existential_question("who played him in the films?"));
        assert!(!is_existential_question(""));
        assert!(!is_existential_question("   ?? "));
    }

    #[test]
    fn baseline_first_turn() {
        let gen = BaselineSrGenerator;
        let c = generate_sr_candidates(
            &gen,
            &Conversation::new(),
            "Who wrote the book Angels and Demons?",
            10,
        )
        .unwrap();
        assert_eq!(
            c[0],
            StructuredRepresentation::new("", "Angels and Demons", "Who wrote the book", "")
                .unwrap()
        );
    }

    #[test]
    fn baseline_resolves_pronoun_from_history() {
        let gen = BaselineSrGenerator;
        let conv = running_example();
        let c = generate_sr_candidates(&gen, &conv, "who played him in the films?", 10).unwrap();
        assert_eq!(
            c[0],
            StructuredRepresentation::new(
                "Angels and Demons",
                "Robert Langdon",
                "who played him in the films",
                ""
            )
            .unwrap()
        );
    }

    #[test]
    fn baseline_without_entity_keeps_context() {
        let gen = BaselineSrGenerator;
        let conv = running_example();
        let c = generate_sr_candidates(&gen, &conv, "how long is the novel?", 10).unwrap();
        assert_eq!(
            c[0],
            StructuredRepresentation::new("Angels and Demons", "", "how long is the novel", "")
                .unwrap()
        );
    }

    struct Fixed(usize);
    impl SrGenerator for Fixed {
        fn generate(&self, _: &Conversation, _: &str) -> Result<Vec<StructuredRepresentation>> {
            Ok((0..self.0)
                .map(|i| StructuredRepresentation::new("", "", format!("r{i}"), "").unwrap())
                .collect())
        }
    }

    #[test]
    fn truncates_to_k() {
        let out = generate_sr_candidates(&Fixed(5), &Conversation::new(), "q", 2).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].relation, "r1");
        assert!(generate_sr_candidates(&Fixed(5), &Conversation::new(), "q", 0).is_err());
    }

    #[test]
    fn gold_sr_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.jsonl");
        std::fs::write(
            &path,
            "{\"conv_id\": 7, \"turn\": 3, \"sr\": \"Angels and Demons|Robert Langdon|who played him in the films|human\"}\n",
        )
        .unwrap();
        let gen = GoldSrGenerator::from_path(&path).unwrap();
        let mut conv = Conversation::with_id("7");
        conv.push("q1", "a1", None);
        conv.push("q2", "a2", None);
        let out = generate_sr_candidates(&gen, &conv, "who played him in the films?", 10).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].question_entity, "Robert Langdon");
        conv.push("q3", "a3", None);
        assert!(matches!(
            gen.generate(&conv, "q4"),
            Err(Error::Generator(_))
        ));
    }

    #[test]
    fn gold_sr_file_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.jsonl");
        std::fs::write(&path, "{\"conv_id\": \"a\", \"turn\": 1, \"sr\": \"a|b|c|d\"}\n{\"conv_id\": \"a\", \"turn\": 2, \"sr\": \"a|b\"}\n").unwrap();
        match GoldSrGenerator::from_path(&path) {
            Err(Error::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}", other = other.err()),
        }
    }
}
