//! Instruction-following translation benchmark: task generation from
//! attribute specs, rule-adherence judging, and dual scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenParams, ScoreRequest};
use crate::model::Conversation;
use crate::pipeline::par_map_ordered;

pub const PROMPT_START: &str = "<START OF PROMPT>";
pub const PROMPT_END: &str = "<END OF PROMPT>";
pub const REFERENCE_START: &str = "<START OF REFERENCE>";
pub const REFERENCE_END: &str = "<END OF REFERENCE>";

/// Dataset tag recorded on conversations built by this module.
pub const TASK_DATASET: &str = "ifmt-tasks";

pub const META_TEMPLATE: &str = r#"As an expert prompt engineer, create a detailed prompt for a language model to perform the following task: translation of a source text, given a set of ${n_rules} rules. The source text should abide by the followin parameters:
- Source language: ${source_language}
- Topic: ${topic}
- Subtopic: ${subtopic}
- Style: ${style}
- Source length: ${source_length}

The translation should be in ${target_language}, and your generated prompt must specify a set of ${n_rules} rules.

IMPORTANT: These rules must be objectively verifiable and should be clearly stated in the prompt. The language model should be instructed to follow these rules when translating the source text. An example of a verifiable rule is "Convert dates to the format DD/MM/YYYY."; an example of an unverifiable rule is "Make the translation sound more professional.". Keep in mind that the rules should make sense in the context of the source text and the target language.

IMPORTANT: Make sure that the source you create has elements that correspond to the rules you set.

To demonstrate the expected output, also provide a reference translation following the requested requirements at the end.

IMPORTANT: Your response should be structured as follows:

<START OF PROMPT>
[INSERT ONLY THE PROMPT HERE COMBINING SOURCE, RULES, AND AN INSTRUCTION. REMIND THE MODEL TO RETURN ONLY THE TRANSLATION. NOTHING ELSE.]
<END OF PROMPT>

<START OF REFERENCE>
[INSERT ONLY THE REFERENCE TRANSLATION. NOTHING ELSE.]
<END OF REFERENCE>

ABIDE STRICTLY BY THE REQUESTED FORMAT."#;

pub const JUDGE_TEMPLATE: &str = r#"You are an expert judge evaluating translation quality. You will be presented with:

- A text, prompting a model for a translation of a source following some rules
- A translation to evaluate

Rate the translation on a scale of 1-6 based on how well it follows the specified rules and instructions in the prompt, regardless of overall translation quality, according to the following criteria:

- Rule Adherence: Does the translation follow all explicit rules stated in the prompt?
- Instruction Compliance: Are specific formatting, style, or technical instructions followed?
- Constraint Observance: Are any limitations or restrictions properly respected?
- Specification Accuracy: Does the output match the exact specifications requested?
- Requirement Fulfillment: Are all mandatory elements present as instructed?

Scoring Rubric:
6 - Perfect Compliance

- Follows every single rule and instruction precisely
- No deviations from any specified constraints
- All requirements fully met as requested
- Complete adherence to formatting/style directives
- Perfect execution of all procedural instructions
- Zero rule violations of any kind

5 - Excellent Compliance

- Follows nearly all rules with only trivial deviations
- Minor lapses that don't affect core requirements
- Strong adherence to most constraints and directives
- Formatting/style mostly correct
- Very few rule violations, all inconsequential

4 - Good Compliance
- Follows most important rules correctly
- Some minor rule violations that don't undermine main objectives
- Generally respects constraints and limitations
- Adequate adherence to formatting requirements
- Few significant rule violations

3 - Fair Compliance
- Follows some rules but misses several others
- Notable violations of stated constraints
- Inconsistent adherence to instructions
- Some formatting/style requirements ignored
- Multiple rule violations affecting compliance

2 - Poor Compliance
- Fails to follow many stated rules
- Significant violations of constraints and limitations
- Poor adherence to specific instructions
- Formatting/style requirements largely ignored
- Frequent and notable rule violations

1 - No Compliance
- Ignores most or all stated rules
- Complete disregard for constraints and limitations
- Fails to follow basic instructions
- No attention to specified requirements
- Systematic rule violations throughout

Provide your evaluation in this JSON format:

{"feedback": "<detailed explanation of the score based on the criteria>", "result": "<only a number from 1 to 6>"}

<START OF SOURCE TEXT>
${prompt}
<END OF SOURCE TEXT>

<START OF TRANSLATION>
${answer}
<END OF TRANSLATION>

You may proceed to evaluate the translation. Focus on evaluating the extent to which the translation follows the rules in the prompt, not its quality. Ensure the output is valid JSON, without additional formatting or explanations."#;

#[derive(Debug, Error)]
pub enum IfmtError {
    #[error("reply has no {0} marker")]
    MarkerMissing(&'static str),
    #[error("the {0} block is empty")]
    EmptyBlock(&'static str),
    #[error("judge reply is not valid JSON: {0}")]
    JsonInvalid(String),
    #[error("judge reply has no {0} field")]
    FieldMissing(&'static str),
    #[error("judge result must be an integer from 1 to 6, got {0}")]
    ResultInvalid(String),
    #[error("no tasks to evaluate")]
    NoTasks,
    #[error("no system output for task {0}")]
    OutputMissing(String),
    #[error("output id {0} appears more than once")]
    DuplicateOutput(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Attributes a generated task must satisfy, filled into the meta prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub n_rules: u8,
    pub source_language: String,
    pub topic: String,
    pub subtopic: String,
    pub style: String,
    pub source_length: String,
    pub target_language: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub id: String,
    #[serde(flatten)]
    pub spec: TaskSpec,
}

/// A benchmark instance: the prompt given to systems under evaluation and
/// the reference translation produced alongside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IfmtTask {
    pub id: String,
    pub prompt: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedTask {
    pub prompt: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub id: String,
    pub translation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeAssessment {
    pub feedback: String,
    pub result: u8,
}

pub fn build_meta_prompt(spec: &TaskSpec) -> String {
    META_TEMPLATE
        .replace("${n_rules}", &spec.n_rules.to_string())
        .replace("${source_language}", &spec.source_language)
        .replace("${topic}", &spec.topic)
        .replace("${subtopic}", &spec.subtopic)
        .replace("${style}", &spec.style)
        .replace("${source_length}", &spec.source_length)
        .replace("${target_language}", &spec.target_language)
}

pub fn build_judge_prompt(task_prompt: &str, answer: &str) -> String {
    JUDGE_TEMPLATE.replace("${prompt}", task_prompt).replace("${answer}", answer)
}

fn block<'a>(
    text: &'a str,
    from: usize,
    start: &'static str,
    end: &'static str,
) -> Result<(&'a str, usize), IfmtError> {
    let open = text[from..].find(start).ok_or(IfmtError::MarkerMissing(start))? + from;
    let body_start = open + start.len();
    let close = text[body_start..].find(end).ok_or(IfmtError::MarkerMissing(end))? + body_start;
    Ok((text[body_start..close].trim(), close + end.len()))
}

/// Extracts the prompt and reference blocks from a generator reply. The
/// four markers must appear in order; text outside them is ignored.
pub fn parse_meta_reply(reply: &str) -> Result<GeneratedTask, IfmtError> {
    let (prompt, after) = block(reply, 0, PROMPT_START, PROMPT_END)?;
    let (reference, _) = block(reply, after, REFERENCE_START, REFERENCE_END)?;
    if prompt.is_empty() {
        return Err(IfmtError::EmptyBlock(PROMPT_START));
    }
    if reference.is_empty() {
        return Err(IfmtError::EmptyBlock(REFERENCE_START));
    }
    Ok(GeneratedTask { prompt: prompt.to_owned(), reference: reference.to_owned() })
}

/// Parses the judge's JSON verdict. A reply wrapped in a Markdown code
/// fence is unwrapped first; the result field may be a string or a bare
/// integer but must land in 1 to 6.
pub fn parse_judge_reply(reply: &str) -> Result<JudgeAssessment, IfmtError> {
    let body = strip_code_fence(reply.trim());
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| IfmtError::JsonInvalid(e.to_string()))?;
    let feedback = value
        .get("feedback")
        .and_then(|v| v.as_str())
        .ok_or(IfmtError::FieldMissing("feedback"))?;
    let raw = value.get("result").ok_or(IfmtError::FieldMissing("result"))?;
    let number = match raw {
        serde_json::Value::String(s) => s.trim().parse::<i64>().ok(),
        serde_json::Value::Number(n) => n.as_i64(),
        _ => None,
    };
    let result = number
        .filter(|v| (1..=6).contains(v))
        .ok_or_else(|| IfmtError::ResultInvalid(raw.to_string()))?;
    Ok(JudgeAssessment { feedback: feedback.to_owned(), result: result as u8 })
}

fn strip_code_fence(text: &str) -> &str {
    let Some(rest) = text.strip_prefix("```") else { return text };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    let rest = rest.strip_suffix("```").unwrap_or(rest);
    rest.trim()
}

#[derive(Debug, Clone)]
pub struct IfmtEndpoints {
    pub judge: String,
    pub quality: String,
}

#[derive(Debug, Clone)]
pub struct IfmtOptions {
    pub workers: usize,
    pub judge_params: GenParams,
}

impl Default for IfmtOptions {
    fn default() -> Self {
        Self { workers: 4, judge_params: GenParams::default() }
    }
}

/// Per-instance dual score: the judge's 1 to 6 rule-adherence rating and
/// the quality metric's score for the same translation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceScore {
    pub id: String,
    pub instruction: f64,
    pub quality: f64,
    pub feedback: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualReport {
    pub instances: Vec<InstanceScore>,
    pub instruction_mean: f64,
    pub quality_mean: f64,
}

pub fn generate_tasks(
    gateway: &Gateway,
    endpoint: &str,
    requests: &[TaskRequest],
    params: &GenParams,
    workers: usize,
) -> Result<Vec<IfmtTask>, IfmtError> {
    let results = par_map_ordered(requests.to_vec(), workers.max(1), |_, request| {
        let prompt = Conversation::from_prompt(build_meta_prompt(&request.spec), TASK_DATASET);
        let texts = gateway.generate(endpoint, &prompt, params)?;
        let generated = parse_meta_reply(&texts[0])?;
        Ok(IfmtTask { id: request.id, prompt: generated.prompt, reference: generated.reference })
    });
    results.into_iter().collect()
}

/// Scores one system's outputs over a task set on both dimensions. Every
/// task must have exactly one output; the quality metric receives the full
/// task prompt as its source field, since the source text is embedded in
/// the prompt, along with the task's reference translation.
pub fn score_outputs(
    gateway: &Gateway,
    endpoints: &IfmtEndpoints,
    tasks: &[IfmtTask],
    outputs: &[SystemOutput],
    options: &IfmtOptions,
) -> Result<DualReport, IfmtError> {
    if tasks.is_empty() {
        return Err(IfmtError::NoTasks);
    }
    let mut translations: BTreeMap<&str, &str> = BTreeMap::new();
    for output in outputs {
        if translations.insert(&output.id, &output.translation).is_some() {
            return Err(IfmtError::DuplicateOutput(output.id.clone()));
        }
    }
    let jobs = tasks
        .iter()
        .map(|task| {
            let translation = translations
                .get(task.id.as_str())
                .copied()
                .ok_or_else(|| IfmtError::OutputMissing(task.id.clone()))?;
            Ok((task.clone(), translation.to_string()))
        })
        .collect::<Result<Vec<(IfmtTask, String)>, IfmtError>>()?;
    gateway.info(&endpoints.quality)?;
    let scored = par_map_ordered(jobs, options.workers.max(1), |_, (task, translation)| {
        let judge_prompt =
            Conversation::from_prompt(build_judge_prompt(&task.prompt, &translation), TASK_DATASET);
        let reply = gateway.generate(&endpoints.judge, &judge_prompt, &options.judge_params)?;
        let assessment = parse_judge_reply(&reply[0])?;
        let quality = gateway.score(
            &endpoints.quality,
            &ScoreRequest {
                source: Some(task.prompt.clone()),
                hypothesis: translation,
                reference: Some(task.reference.clone()),
                lp: None,
            },
        )?;
        Ok(InstanceScore {
            id: task.id,
            instruction: f64::from(assessment.result),
            quality: quality.value(),
            feedback: assessment.feedback,
        })
    });
    let instances: Vec<InstanceScore> = scored.into_iter().collect::<Result<_, IfmtError>>()?;
    let count = instances.len() as f64;
    let instruction_mean = instances.iter().map(|i| i.instruction).sum::<f64>() / count;
    let quality_mean = instances.iter().map(|i| i.quality).sum::<f64>() / count;
    Ok(DualReport { instances, instruction_mean, quality_mean })
}
