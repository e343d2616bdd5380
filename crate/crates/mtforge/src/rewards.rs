//! Verifiable rewards for reinforcement learning: regex-checked
//! translation rewards gated on estimated quality, and a preference
//! evaluation reward for picking the better of two translations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::guidelines::GuidelineSpec;
use crate::model::VerdictChoice;
use crate::pipeline::par_map_ordered;
use crate::prefs::{build_pairwise_prompt, parse_choice, PreferencePair};

#[derive(Debug, Error)]
pub enum RewardError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Full reward only when every guideline pattern matches.
    Strict,
    /// Partial credit: the fraction of guideline patterns that match.
    Fractional,
}

/// Which guideline patterns an output satisfied and the resulting score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegexComponent {
    pub matched: Vec<String>,
    pub missed: Vec<String>,
    pub score: f64,
}

/// Checks an output against each guideline pattern. With no guidelines
/// the requirement is vacuous and the score is 1 in both modes.
pub fn regex_reward(guidelines: &[GuidelineSpec], output: &str, mode: RewardMode) -> RegexComponent {
    let mut matched = Vec::new();
    let mut missed = Vec::new();
    for guideline in guidelines {
        if guideline.matches(output) {
            matched.push(guideline.id().to_owned());
        } else {
            missed.push(guideline.id().to_owned());
        }
    }
    let score = if guidelines.is_empty() {
        1.0
    } else {
        match mode {
            RewardMode::Strict => {
                if missed.is_empty() {
                    1.0
                } else {
                    0.0
                }
            }
            RewardMode::Fractional => matched.len() as f64 / guidelines.len() as f64,
        }
    };
    RegexComponent { matched, missed, score }
}

/// One output awaiting a verifiable translation reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTask {
    pub id: String,
    pub source: String,
    pub output: String,
    pub guidelines: Vec<GuidelineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationReward {
    pub id: String,
    pub regex: RegexComponent,
    pub quality: f64,
    /// True when quality fell below the gate and zeroed the reward.
    pub quality_gated: bool,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct RewardOptions {
    pub mode: RewardMode,
    /// Minimum estimated quality; below it the reward is zero no matter
    /// what the patterns say.
    pub quality_gate: f64,
    pub workers: usize,
}

impl Default for RewardOptions {
    fn default() -> Self {
        Self { mode: RewardMode::Strict, quality_gate: 0.8, workers: 4 }
    }
}

/// Scores one output: the regex component, zeroed when the quality
/// endpoint rates the output below the gate. Keeping the gate inside the
/// reward stops the policy from gaming patterns with degenerate text.
pub fn translation_reward(
    gateway: &Gateway,
    quality_endpoint: &str,
    task: &RewardTask,
    options: &RewardOptions,
) -> Result<TranslationReward, RewardError> {
    let regex = regex_reward(&task.guidelines, &task.output, options.mode);
    let quality =
        gateway.reward(quality_endpoint, &task.source, &task.output, task.lp.as_deref())?;
    let quality_gated = quality < options.quality_gate;
    let reward = if quality_gated { 0.0 } else { regex.score };
    Ok(TranslationReward { id: task.id.clone(), regex, quality, quality_gated, reward })
}

/// Scores a batch in input order.
pub fn reward_batch(
    gateway: &Gateway,
    quality_endpoint: &str,
    tasks: &[RewardTask],
    options: &RewardOptions,
) -> Result<Vec<TranslationReward>, RewardError> {
    let indexed: Vec<&RewardTask> = tasks.iter().collect();
    par_map_ordered(indexed, options.workers, |_, task| {
        translation_reward(gateway, quality_endpoint, task, options)
    })
    .into_iter()
    .collect()
}

/// Which assistant slot holds the preferred translation when a pair is
/// presented to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    A,
    B,
}

impl Slot {
    fn as_choice(self) -> VerdictChoice {
        match self {
            Slot::A => VerdictChoice::A,
            Slot::B => VerdictChoice::B,
        }
    }
}

/// A preference pair recast as an evaluation exercise: the model sees
/// both translations and is rewarded for picking the preferred one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEvalTask {
    pub id: String,
    pub pair: PreferencePair,
    pub chosen_slot: Slot,
}

impl PreferenceEvalTask {
    /// Assigns the presentation slot from a seeded hash of the pair id,
    /// so roughly half the tasks put the preferred translation second.
    pub fn from_pair(pair: PreferencePair, seed: u64) -> Self {
        let chosen_slot = if crate::prefs::chosen_presented_as_a(seed, &pair.id) {
            Slot::A
        } else {
            Slot::B
        };
        Self { id: pair.id.clone(), pair, chosen_slot }
    }

    /// The judging prompt shown to the model being trained.
    pub fn prompt(&self) -> String {
        let (a, b) = match self.chosen_slot {
            Slot::A => (&self.pair.chosen, &self.pair.rejected),
            Slot::B => (&self.pair.rejected, &self.pair.chosen),
        };
        build_pairwise_prompt(&self.pair.instruction, a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceEvalOutcome {
    CorrectChoice,
    WrongChoice,
    Tie,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEvalReward {
    pub id: String,
    pub reward: f64,
    pub outcome: PreferenceEvalOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictChoice>,
}

/// Rewards a model verdict: 1 for naming the preferred slot, 0 for the
/// wrong slot, a tie, or output with no parseable verdict.
pub fn preference_eval_reward(task: &PreferenceEvalTask, model_output: &str) -> PreferenceEvalReward {
    let verdict = match parse_choice(model_output) {
        Ok(verdict) => verdict,
        Err(_) => {
            return PreferenceEvalReward {
                id: task.id.clone(),
                reward: 0.0,
                outcome: PreferenceEvalOutcome::Unparseable,
                verdict: None,
            }
        }
    };
    let (reward, outcome) = if verdict.choice == task.chosen_slot.as_choice() {
        (1.0, PreferenceEvalOutcome::CorrectChoice)
    } else if verdict.choice == VerdictChoice::Tie {
        (0.0, PreferenceEvalOutcome::Tie)
    } else {
        (0.0, PreferenceEvalOutcome::WrongChoice)
    };
    PreferenceEvalReward { id: task.id.clone(), reward, outcome, verdict: Some(verdict.choice) }
}
