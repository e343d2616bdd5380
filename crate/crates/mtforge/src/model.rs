//! Shared vocabulary types: language tags, conversations, metric scores,
//! judge verdicts, and the comparison rules between scores.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("cannot compare {left} with {right}: metric id and direction must match")]
    MetricMismatch { left: String, right: String },
    #[error("{field} must be an integer in 1..=5, got {value}")]
    ScoreOutOfRange { field: &'static str, value: i64 },
    #[error("metric value must be finite, got {0}")]
    NonFiniteValue(f64),
    #[error("conversation has no turns")]
    EmptyConversation,
    #[error("conversation must start with a user turn")]
    FirstTurnNotUser,
    #[error("turns must alternate user/assistant; violated at turn {0}")]
    NonAlternatingTurns(usize),
    #[error("language code {0:?} is not of the form \"xx\" or \"xx_XX\"")]
    BadLanguageCode(String),
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("unknown category label {0:?}")]
    UnknownCategory(String),
}

/// A language plus optional region, e.g. `en`, `pt_BR`, `zh_TW`.
///
/// The `code` is what appears in data files and report columns; the
/// `display_name` is what gets substituted into prompts ("French",
/// "Brazilian Portuguese").
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLanguageTag")]
pub struct LanguageTag {
    code: String,
    display_name: String,
}

impl LanguageTag {
    pub fn new(code: impl Into<String>, display_name: impl Into<String>) -> Result<Self, ModelError> {
        let code = code.into();
        let display_name = display_name.into();
        if !valid_code(&code) {
            return Err(ModelError::BadLanguageCode(code));
        }
        if display_name.trim().is_empty() {
            return Err(ModelError::EmptyField("display_name"));
        }
        Ok(Self { code, display_name })
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn display_name(&self) -> &str {
        &self.display_name
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

fn valid_code(code: &str) -> bool {
    let mut parts = code.splitn(2, '_');
    let lang = parts.next().unwrap_or("");
    let lang_ok = (2..=3).contains(&lang.len()) && lang.bytes().all(|b| b.is_ascii_lowercase());
    let region_ok = match parts.next() {
        None => true,
        Some(r) => (2..=4).contains(&r.len()) && r.bytes().all(|b| b.is_ascii_alphabetic()),
    };
    lang_ok && region_ok
}

#[derive(Deserialize)]
struct RawLanguageTag {
    code: String,
    display_name: String,
}

impl TryFrom<RawLanguageTag> for LanguageTag {
    type Error = ModelError;
    fn try_from(raw: RawLanguageTag) -> Result<Self, Self::Error> {
        LanguageTag::new(raw.code, raw.display_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into() }
    }
}

/// A multi-turn exchange. Turns always alternate user/assistant and the
/// first turn is always from the user; both invariants hold on every
/// constructed or deserialized value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConversation")]
pub struct Conversation {
    turns: Vec<Turn>,
    source_dataset: String,
}

impl Conversation {
    pub fn new(turns: Vec<Turn>, source_dataset: impl Into<String>) -> Result<Self, ModelError> {
        if turns.is_empty() {
            return Err(ModelError::EmptyConversation);
        }
        if turns[0].role != Role::User {
            return Err(ModelError::FirstTurnNotUser);
        }
        for (i, pair) in turns.windows(2).enumerate() {
            if pair[0].role == pair[1].role {
                return Err(ModelError::NonAlternatingTurns(i + 1));
            }
        }
        Ok(Self { turns, source_dataset: source_dataset.into() })
    }

    /// Single user turn, the common case for prompts awaiting an answer.
    pub fn from_prompt(text: impl Into<String>, source_dataset: impl Into<String>) -> Self {
        Self { turns: vec![Turn::user(text)], source_dataset: source_dataset.into() }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn source_dataset(&self) -> &str {
        &self.source_dataset
    }

    pub fn first_user_text(&self) -> &str {
        &self.turns[0].text
    }

    pub fn last_assistant_text(&self) -> Option<&str> {
        self.turns.iter().rev().find(|t| t.role == Role::Assistant).map(|t| t.text.as_str())
    }

    /// Appends an assistant answer. Fails if the last turn is already an
    /// assistant turn.
    pub fn with_answer(mut self, text: impl Into<String>) -> Result<Self, ModelError> {
        if self.turns.last().map(|t| t.role) == Some(Role::Assistant) {
            return Err(ModelError::NonAlternatingTurns(self.turns.len()));
        }
        self.turns.push(Turn::assistant(text));
        Ok(self)
    }
}

#[derive(Deserialize)]
struct RawConversation {
    turns: Vec<Turn>,
    #[serde(default)]
    source_dataset: String,
}

impl TryFrom<RawConversation> for Conversation {
    type Error = ModelError;
    fn try_from(raw: RawConversation) -> Result<Self, Self::Error> {
        Conversation::new(raw.turns, raw.source_dataset)
    }
}

/// One aligned sentence or segment pair from a parallel corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub source: String,
    pub target: String,
    pub lp0: LanguageTag,
    pub lp1: LanguageTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// Whether larger or smaller values of a metric indicate better quality.
///
/// Neural metrics disagree on this (COMET-style scores go up, MetricX-style
/// error predictions go down), so every score carries its direction and
/// comparisons refuse to mix them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::HigherBetter => "higher-better",
            Direction::LowerBetter => "lower-better",
        })
    }
}

/// A single scalar quality judgment from some metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMetricScore")]
pub struct MetricScore {
    metric_id: String,
    value: f64,
    direction: Direction,
}

impl MetricScore {
    pub fn new(metric_id: impl Into<String>, value: f64, direction: Direction) -> Result<Self, ModelError> {
        let metric_id = metric_id.into();
        if metric_id.trim().is_empty() {
            return Err(ModelError::EmptyField("metric_id"));
        }
        if !value.is_finite() {
            return Err(ModelError::NonFiniteValue(value));
        }
        Ok(Self { metric_id, value, direction })
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// True when this score clears `threshold` in the metric's own
    /// direction: at or above it for higher-better metrics, at or below
    /// it for lower-better ones.
    pub fn passes(&self, threshold: f64) -> bool {
        match self.direction {
            Direction::HigherBetter => self.value >= threshold,
            Direction::LowerBetter => self.value <= threshold,
        }
    }
}

#[derive(Deserialize)]
struct RawMetricScore {
    metric_id: String,
    value: f64,
    direction: Direction,
}

impl TryFrom<RawMetricScore> for MetricScore {
    type Error = ModelError;
    fn try_from(raw: RawMetricScore) -> Result<Self, Self::Error> {
        MetricScore::new(raw.metric_id, raw.value, raw.direction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreComparison {
    ABetter,
    BBetter,
    Equal,
}

/// Compares two scores from the same metric, respecting its direction.
/// Exactly equal values compare [`ScoreComparison::Equal`]; there is no
/// epsilon, since callers that want a margin should apply it themselves.
pub fn compare_scores(a: &MetricScore, b: &MetricScore) -> Result<ScoreComparison, ModelError> {
    if a.metric_id != b.metric_id || a.direction != b.direction {
        return Err(ModelError::MetricMismatch {
            left: format!("{} ({})", a.metric_id, a.direction),
            right: format!("{} ({})", b.metric_id, b.direction),
        });
    }
    if a.value == b.value {
        return Ok(ScoreComparison::Equal);
    }
    let a_wins = match a.direction {
        Direction::HigherBetter => a.value > b.value,
        Direction::LowerBetter => a.value < b.value,
    };
    Ok(if a_wins { ScoreComparison::ABetter } else { ScoreComparison::BBetter })
}

/// Reasoning and readability grades from the triage judge, each 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScoreBundle")]
pub struct ScoreBundle {
    reasoning: u8,
    readability: u8,
}

impl ScoreBundle {
    pub fn new(reasoning: i64, readability: i64) -> Result<Self, ModelError> {
        let check = |field, value: i64| {
            if (1..=5).contains(&value) {
                Ok(value as u8)
            } else {
                Err(ModelError::ScoreOutOfRange { field, value })
            }
        };
        Ok(Self {
            reasoning: check("reasoning", reasoning)?,
            readability: check("readability", readability)?,
        })
    }

    pub fn reasoning(&self) -> u8 {
        self.reasoning
    }

    pub fn readability(&self) -> u8 {
        self.readability
    }
}

#[derive(Deserialize)]
struct RawScoreBundle {
    reasoning: i64,
    readability: i64,
}

impl TryFrom<RawScoreBundle> for ScoreBundle {
    type Error = ModelError;
    fn try_from(raw: RawScoreBundle) -> Result<Self, Self::Error> {
        ScoreBundle::new(raw.reasoning, raw.readability)
    }
}

/// The instruction categories the triage judge sorts records into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    Coding,
    MathematicalReasoning,
    AdviceAndBrainstorming,
    QuestionAnswering,
    CreativeWritingAndPersona,
    TextCorrectionOrRewriting,
    Summarization,
    Translation,
    Classification,
    Other,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Coding,
        Category::MathematicalReasoning,
        Category::AdviceAndBrainstorming,
        Category::QuestionAnswering,
        Category::CreativeWritingAndPersona,
        Category::TextCorrectionOrRewriting,
        Category::Summarization,
        Category::Translation,
        Category::Classification,
        Category::Other,
    ];

    /// The label as it appears in judge prompts and serialized records.
    pub fn label(self) -> &'static str {
        match self {
            Category::Coding => "Coding",
            Category::MathematicalReasoning => "Mathematical Reasoning",
            Category::AdviceAndBrainstorming => "Advice and Brainstorming",
            Category::QuestionAnswering => "Question Answering",
            Category::CreativeWritingAndPersona => "Creative Writing and Persona",
            Category::TextCorrectionOrRewriting => "Text Correction or Rewriting",
            Category::Summarization => "Summarization",
            Category::Translation => "Translation",
            Category::Classification => "Classification",
            Category::Other => "Other",
        }
    }

    /// Case-insensitive label lookup, tolerant of surrounding whitespace
    /// and a trailing period. Returns `None` for anything unrecognized.
    pub fn from_label(label: &str) -> Option<Self> {
        let wanted = label.trim().trim_end_matches('.').trim();
        Category::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(wanted))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl TryFrom<String> for Category {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Category::from_label(&s).ok_or(ModelError::UnknownCategory(s))
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.label().to_owned()
    }
}

/// Which of two presented answers a pairwise judge preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictChoice {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub choice: VerdictChoice,
    /// Whatever free-form justification preceded the verdict line.
    pub rationale: String,
}
