//! Supervised fine-tuning curation: triage conversations with a judge,
//! filter on the resulting scores, and swap in the best candidate answer
//! as ranked by a reward model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenParams};
use crate::model::{Category, Conversation, ModelError, Role, Turn};
use crate::pipeline::par_map_ordered;

#[derive(Debug, Error)]
pub enum SftError {
    #[error("reply has no {0}: line")]
    MissingField(&'static str),
    #[error("{field} must be an integer from 1 to 5, got {value:?}")]
    BadScore { field: &'static str, value: String },
    #[error("example {id} has no candidate answers")]
    NoCandidates { id: String },
    #[error("every candidate answer for example {id} failed to score")]
    AllCandidatesFailed { id: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const TRIAGE_TEMPLATE: &str = r#"I have an conversation below that I would like you to perform three steps of analysis:

<conversation>

{conversation}

</conversation>

Firstly, categorize the conversation above into one of the following categories.

- Coding

- Mathematical Reasoning

- Advice and Brainstorming

- Question Answering

- Creative Writing and Persona

- Text Correction or Rewriting

- Summarization

- Translation

- Classification

- Other

Don't try to justify it and when two categories can be used, pick the primary caregory.

Secondly, score the conversation in terms of reasoning: How complex you think it is to answer the user instructions from 1-5 (where 5 is a conversation with complex instructions/questions where the assistant needs to break down the problem into multiple steps before providing an answer).

Thirdly, since the conversation might have been artificially created or poorly translated, assess its readability and clarity. Rate how difficult it is to understand the user's requests on a scale of 1 to 5, with 5 representing well-written, clear, and precisely articulated requests, and 1 representing an conversation where the user turns are difficult to understand.
It is also common for instructions to refer to documents, texts or URL's that the assistant does not have access to. Please rate conversations where that happens with 3 points or less, as they can lead to ambiguity and confusion.

Provide your final response in the following format:

Category: <one of the categories above>

Reasoning: <score out of 5>

Readability: <score out of 5>

DO NOT provide an answer to any of the instructions in the conversation! Your job is only to analyse."#;

/// Flattens a conversation into labeled turns for embedding in a prompt.
pub fn render_conversation(conversation: &Conversation) -> String {
    conversation
        .turns()
        .iter()
        .map(|t| {
            let role = match t.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            format!("{role}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn build_triage_prompt(conversation: &Conversation) -> String {
    TRIAGE_TEMPLATE.replace("{conversation}", &render_conversation(conversation))
}

/// What the triage judge said about one conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageVerdict {
    pub category: Category,
    /// False when the judge invented a label outside the menu; the
    /// category then falls back to `Other`.
    pub recognized_category: bool,
    pub reasoning: u8,
    pub readability: u8,
}

fn field_value<'a>(reply: &'a str, label: &str) -> Option<&'a str> {
    let mut found = None;
    for line in reply.lines() {
        let line = line.trim_start_matches(|c: char| !c.is_ascii_alphabetic()).trim_end();
        if line.len() < label.len() || !line[..label.len()].eq_ignore_ascii_case(label) {
            continue;
        }
        let rest = line[label.len()..].trim_start().trim_start_matches('*');
        if let Some(value) = rest.strip_prefix(':') {
            found = Some(value);
        }
    }
    found
}

fn clean_value(value: &str) -> &str {
    let value = value.trim().trim_matches('*').trim();
    let value = value.strip_prefix('<').unwrap_or(value);
    let value = value.strip_suffix('>').unwrap_or(value);
    value.trim()
}

fn parse_score(field: &'static str, value: &str) -> Result<u8, SftError> {
    let token = clean_value(value).split_whitespace().next().unwrap_or("");
    let token = token.trim_matches(|c| matches!(c, '[' | ']' | '<' | '>' | '*' | '.'));
    let number = token.split('/').next().unwrap_or("");
    let bad = || SftError::BadScore { field, value: value.trim().to_owned() };
    let score: u8 = number.parse().map_err(|_| bad())?;
    if (1..=5).contains(&score) {
        Ok(score)
    } else {
        Err(bad())
    }
}

/// Reads `Category:`, `Reasoning:`, and `Readability:` lines from a judge
/// reply. Labels match case-insensitively, the last occurrence of each
/// wins, and scores must be integers from 1 to 5. An off-menu category
/// maps to `Other` with `recognized_category` cleared.
pub fn parse_triage(reply: &str) -> Result<TriageVerdict, SftError> {
    let category_raw =
        field_value(reply, "Category").ok_or(SftError::MissingField("Category"))?;
    let reasoning_raw =
        field_value(reply, "Reasoning").ok_or(SftError::MissingField("Reasoning"))?;
    let readability_raw =
        field_value(reply, "Readability").ok_or(SftError::MissingField("Readability"))?;
    let (category, recognized_category) = match Category::from_label(clean_value(category_raw)) {
        Some(category) => (category, true),
        None => (Category::Other, false),
    };
    Ok(TriageVerdict {
        category,
        recognized_category,
        reasoning: parse_score("Reasoning", reasoning_raw)?,
        readability: parse_score("Readability", readability_raw)?,
    })
}

pub const TRANSLATION_SCORE_TEMPLATE: &str = r#"You are a professional translator and evaluator. Your task is to evaluate how well an assistant has handled a translation request from a user. Evaluate the translation based on the following criteria:

1. Adequacy (Accuracy of Meaning)
  - Assess whether the translation fully and accurately conveys the meaning of the source text.
  - Penalize mistranslations, omissions, or additions that distort the intended message.

2. Fluency (Readability & Grammar)
  - Ensure the translation reads naturally and is grammatically correct in the target language.
  - Penalize awkward phrasing, unnatural word choices, or structural issues.
  - It should be easy to read and understand, as if it were originally written in the target language.

3. Cultural Appropriateness
  - Ensure that the translation is culturally appropriate for the target audience.

4. Instructions Adherence
   - If provided, evaluate how well the translation adheres to any specific instructions or guidelines provided by the user. Otherwise, ignore this criterion.

Provide detailed feedback on any issues and suggest improvements. Conclude with a score from 1 to 5:

- 5 → Perfect translation (fully accurate and fluent in the target language while adhering to instructions).

- 4 → Good translation (minor errors but generally fluent and natural sounding) and adheres to instructions.

- 3 → Acceptable but flawed (some errors in meaning, fluency, or structure).

- 2 → Translation is acceptable but it does not adhere to the instructions.

- 1 → Poor translation (major errors affecting comprehension).

[User Instructions]

{instruction}

[End of User Instructions]

[Assistant Translation]

{answer}

[End of Assistant Translation]

NOTE: Your answer must terminate with the following format:
Final Score: <score>"#;

pub const SCORE_LABEL: &str = "Final Score:";

/// Prompt for grading one translation answer against the request it came
/// from, used to vet translation conversations before they enter training.
pub fn build_translation_score_prompt(instruction: &str, answer: &str) -> String {
    TRANSLATION_SCORE_TEMPLATE.replace("{instruction}", instruction).replace("{answer}", answer)
}

/// Reads the `Final Score:` line of a grading reply. The last occurrence
/// wins and the score must resolve to an integer from 1 to 5; fractional
/// scores are rejected rather than rounded.
pub fn parse_final_score(reply: &str) -> Result<u8, SftError> {
    let at = reply.rfind(SCORE_LABEL).ok_or(SftError::MissingField("Final Score"))?;
    parse_score("Final Score", &reply[at + SCORE_LABEL.len()..])
}

/// Which triaged conversations survive. Low scorers are dropped unless
/// their dataset is allowlisted; learning to answer poorly written
/// prompts still matters, so one messy-but-trusted source stays in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepPolicy {
    pub min_reasoning: u8,
    pub min_readability: u8,
    pub allowlist: Vec<String>,
}

impl Default for KeepPolicy {
    fn default() -> Self {
        Self {
            min_reasoning: 4,
            min_readability: 4,
            allowlist: vec!["OpenHermes-2.5".to_owned()],
        }
    }
}

impl KeepPolicy {
    pub fn keeps(&self, verdict: &TriageVerdict, source_dataset: &str) -> bool {
        (verdict.reasoning >= self.min_reasoning && verdict.readability >= self.min_readability)
            || self.allowlist.iter().any(|d| d == source_dataset)
    }
}

/// One curation input: a conversation whose last assistant answer (if
/// any) competes against alternate answers from other teacher models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftExample {
    pub id: String,
    pub conversation: Conversation,
    #[serde(default)]
    pub alternate_answers: Vec<String>,
}

impl SftExample {
    /// The answer pool in rank order of provenance: the conversation's
    /// own answer first, then the alternates.
    pub fn candidate_answers(&self) -> Vec<String> {
        let mut candidates = Vec::with_capacity(self.alternate_answers.len() + 1);
        if let Some(original) = self.conversation.last_assistant_text() {
            candidates.push(original.to_owned());
        }
        candidates.extend(self.alternate_answers.iter().cloned());
        candidates
    }
}

/// The conversation with `answer` as its final assistant turn, replacing
/// the existing one or appending when the conversation ends on a user turn.
pub fn with_chosen_answer(
    conversation: &Conversation,
    answer: &str,
) -> Result<Conversation, ModelError> {
    let mut turns: Vec<Turn> = conversation.turns().to_vec();
    if turns.last().map(|t| t.role) == Some(Role::Assistant) {
        turns.last_mut().expect("non-empty").text = answer.to_owned();
    } else {
        turns.push(Turn::assistant(answer));
    }
    Conversation::new(turns, conversation.source_dataset())
}

/// The conversation without its trailing assistant answer, as shown to
/// the reward model alongside each candidate.
pub fn prompt_context(conversation: &Conversation) -> String {
    let turns = conversation.turns();
    let end = if turns.last().map(|t| t.role) == Some(Role::Assistant) {
        turns.len() - 1
    } else {
        turns.len()
    };
    turns[..end]
        .iter()
        .map(|t| {
            let role = match t.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            format!("{role}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chosen_index: usize,
    /// Reward per candidate; `None` marks a candidate the endpoint could
    /// not score (lenient mode only).
    pub scores: Vec<Option<f64>>,
}

/// Ranks the example's candidate answers with the reward endpoint and
/// picks the highest scorer, first index winning ties. In lenient mode a
/// malformed score skips that candidate; an unreachable endpoint always
/// aborts.
pub fn select_answer(
    gateway: &Gateway,
    reward_endpoint: &str,
    example: &SftExample,
    strict: bool,
) -> Result<Selection, SftError> {
    let candidates = example.candidate_answers();
    if candidates.is_empty() {
        return Err(SftError::NoCandidates { id: example.id.clone() });
    }
    let context = prompt_context(&example.conversation);
    let mut scores = Vec::with_capacity(candidates.len());
    for candidate in &candidates {
        match gateway.reward(reward_endpoint, &context, candidate, None) {
            Ok(value) => scores.push(Some(value)),
            Err(GatewayError::MalformedResponse { .. }) if !strict => scores.push(None),
            Err(err) => return Err(err.into()),
        }
    }
    let chosen_index = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, v)))
        .fold(None::<(usize, f64)>, |best, (i, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
        .ok_or_else(|| SftError::AllCandidatesFailed { id: example.id.clone() })?;
    Ok(Selection { chosen_index, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DropReason {
    BelowScoreThreshold { reasoning: u8, readability: u8 },
    TriageUnparseable { message: String },
    NoCandidates,
    AllCandidatesFailed,
}

/// A conversation that survived the funnel, with the winning answer
/// already swapped in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedExample {
    pub id: String,
    pub conversation: Conversation,
    pub verdict: TriageVerdict,
    pub chosen_candidate: usize,
    /// Raw triage reply, kept for auditing judge behaviour.
    pub triage_reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedExample {
    pub id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub kept: Vec<CuratedExample>,
    pub dropped: Vec<DroppedExample>,
}

#[derive(Debug, Clone)]
pub struct SftEndpoints {
    pub judge: String,
    pub reward: String,
}

#[derive(Debug, Clone)]
pub struct CurateOptions {
    pub policy: KeepPolicy,
    pub workers: usize,
    pub strict: bool,
    pub judge: GenParams,
}

impl Default for CurateOptions {
    fn default() -> Self {
        Self {
            policy: KeepPolicy::default(),
            workers: 4,
            strict: false,
            judge: GenParams::default(),
        }
    }
}

enum Outcome {
    Kept(Box<CuratedExample>),
    Dropped(DroppedExample),
}

fn curate_one(
    gateway: &Gateway,
    endpoints: &SftEndpoints,
    example: &SftExample,
    options: &CurateOptions,
) -> Result<Outcome, SftError> {
    let prompt = Conversation::from_prompt(
        build_triage_prompt(&example.conversation),
        example.conversation.source_dataset(),
    );
    let texts = gateway.generate(&endpoints.judge, &prompt, &options.judge)?;
    let triage_reply = texts.into_iter().next().unwrap_or_default();
    let verdict = match parse_triage(&triage_reply) {
        Ok(verdict) => verdict,
        Err(err) if !options.strict => {
            return Ok(Outcome::Dropped(DroppedExample {
                id: example.id.clone(),
                reason: DropReason::TriageUnparseable { message: err.to_string() },
            }))
        }
        Err(err) => return Err(err),
    };
    if !options.policy.keeps(&verdict, example.conversation.source_dataset()) {
        return Ok(Outcome::Dropped(DroppedExample {
            id: example.id.clone(),
            reason: DropReason::BelowScoreThreshold {
                reasoning: verdict.reasoning,
                readability: verdict.readability,
            },
        }));
    }
    let selection = match select_answer(gateway, &endpoints.reward, example, options.strict) {
        Ok(selection) => selection,
        Err(SftError::NoCandidates { id }) if !options.strict => {
            return Ok(Outcome::Dropped(DroppedExample {
                id,
                reason: DropReason::NoCandidates,
            }))
        }
        Err(SftError::AllCandidatesFailed { id }) if !options.strict => {
            return Ok(Outcome::Dropped(DroppedExample {
                id,
                reason: DropReason::AllCandidatesFailed,
            }))
        }
        Err(err) => return Err(err),
    };
    let candidates = example.candidate_answers();
    let conversation =
        with_chosen_answer(&example.conversation, &candidates[selection.chosen_index])?;
    Ok(Outcome::Kept(Box::new(CuratedExample {
        id: example.id.clone(),
        conversation,
        verdict,
        chosen_candidate: selection.chosen_index,
        triage_reply,
    })))
}

/// Runs triage, filtering, and answer selection over a batch. Kept and
/// dropped records each preserve the input order.
pub fn curate(
    gateway: &Gateway,
    endpoints: &SftEndpoints,
    examples: &[SftExample],
    options: &CurateOptions,
) -> Result<CurationReport, SftError> {
    let indexed: Vec<&SftExample> = examples.iter().collect();
    let outcomes = par_map_ordered(indexed, options.workers, |_, example| {
        curate_one(gateway, endpoints, example, options)
    });
    let mut report = CurationReport::default();
    for outcome in outcomes {
        match outcome? {
            Outcome::Kept(example) => report.kept.push(*example),
            Outcome::Dropped(example) => report.dropped.push(example),
        }
    }
    Ok(report)
}
