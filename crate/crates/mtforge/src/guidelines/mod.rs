//! Verifiable translation instructions: guideline bundles attached to
//! synthetic source texts whose translations can be checked with regexes.

mod catalog;
pub mod prompts;

pub use catalog::{
    builtin_catalog, parse_spec, Catalog, CatalogError, GuidelineSpec, SelfCheckFailure,
};

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenParams, ScoreRequest};
use crate::hashing::stable_u64;
use crate::model::{Conversation, LanguageTag};
use crate::pipeline::par_map_ordered;

const PIPELINE_DATASET: &str = "verifiable-instructions";

#[derive(Debug, Error)]
pub enum GuidelineError {
    #[error("catalog has no specs to sample from")]
    EmptyCatalog,
    #[error("topic list is empty")]
    EmptyTopics,
    #[error("cannot move from {from} to {to}")]
    InvalidTransition { from: String, to: &'static str },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("cannot read topics from {path}: {source}")]
    TopicsIo { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: expected `topic<TAB>subtopic`")]
    TopicsFormat { path: PathBuf, line: usize },
}

/// A topic and subtopic steering what a generated source text is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicPair {
    pub topic: String,
    pub subtopic: String,
}

impl TopicPair {
    pub fn new(topic: impl Into<String>, subtopic: impl Into<String>) -> Self {
        Self { topic: topic.into(), subtopic: subtopic.into() }
    }
}

impl fmt::Display for TopicPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {}", self.topic, self.subtopic)
    }
}

/// Loads tab-separated `topic<TAB>subtopic` lines. Blank lines and `#`
/// comments are skipped.
pub fn load_topics(path: impl AsRef<Path>) -> Result<Vec<TopicPair>, GuidelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| GuidelineError::TopicsIo { path: path.to_path_buf(), source })?;
    let mut topics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((topic, subtopic)) = trimmed.split_once('\t') else {
            return Err(GuidelineError::TopicsFormat { path: path.to_path_buf(), line: i + 1 });
        };
        topics.push(TopicPair::new(topic.trim(), subtopic.trim()));
    }
    if topics.is_empty() {
        return Err(GuidelineError::EmptyTopics);
    }
    Ok(topics)
}

/// The topic list shipped with the crate, for runs that do not bring
/// their own.
pub fn builtin_topics() -> Vec<TopicPair> {
    include_str!("../../topics/starter_topics.tsv")
        .lines()
        .filter(|line| !line.trim().is_empty() && !line.trim().starts_with('#'))
        .map(|line| {
            let (topic, subtopic) =
                line.split_once('\t').expect("embedded topic list is tab separated");
            TopicPair::new(topic.trim(), subtopic.trim())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthClass {
    OneSentence,
    TwoSentences,
    OneParagraph,
}

impl LengthClass {
    pub const ALL: [LengthClass; 3] =
        [Self::OneSentence, Self::TwoSentences, Self::OneParagraph];

    pub fn label(&self) -> &'static str {
        match self {
            Self::OneSentence => "1 sentence",
            Self::TwoSentences => "2 sentences",
            Self::OneParagraph => "1 paragraph",
        }
    }
}

impl fmt::Display for LengthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One to four guidelines from distinct categories, plus the topic and
/// length the source text should have.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineBundle {
    pub guidelines: Vec<GuidelineSpec>,
    pub topic: TopicPair,
    pub length: LengthClass,
}

impl GuidelineBundle {
    /// The numbered guideline block used in prompts.
    pub fn guideline_text(&self) -> String {
        self.guidelines
            .iter()
            .enumerate()
            .map(|(i, g)| format!("{}) {}", i + 1, g.prompt_line()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// The dedicated generator for the sample at `index` of a run. Seeding
/// per sample keeps every draw replayable in isolation.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_u64(&[
        "verifiable-sample",
        &seed.to_string(),
        &index.to_string(),
    ]))
}

/// Draws a bundle: a guideline count from 1 to 4 (capped by the number
/// of available categories), that many distinct categories, one spec per
/// category, then a topic and a length, all uniform.
pub fn sample_bundle(
    catalog: &Catalog,
    topics: &[TopicPair],
    rng: &mut impl Rng,
) -> Result<GuidelineBundle, GuidelineError> {
    let categories = catalog.categories();
    if categories.is_empty() {
        return Err(GuidelineError::EmptyCatalog);
    }
    if topics.is_empty() {
        return Err(GuidelineError::EmptyTopics);
    }
    let k = rng.gen_range(1..=4usize).min(categories.len());
    let mut order: Vec<usize> = (0..categories.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..order.len());
        order.swap(i, j);
    }
    let mut guidelines = Vec::with_capacity(k);
    for &ci in &order[..k] {
        let specs = catalog.by_category(&categories[ci]);
        guidelines.push(specs[rng.gen_range(0..specs.len())].clone());
    }
    let topic = topics[rng.gen_range(0..topics.len())].clone();
    let length = LengthClass::ALL[rng.gen_range(0..LengthClass::ALL.len())];
    Ok(GuidelineBundle { guidelines, topic, length })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Precheck,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    /// The source already follows at least one guideline, so there is
    /// nothing left for the translation to demonstrate.
    SourceAlreadyCompliant { detected_by: Detector, guideline_ids: Vec<String> },
    TranslationMissingPattern { guideline_id: String },
    QualityBelowGate { value: f64 },
    JudgeUnparseable,
}

/// Lifecycle of a verifiable sample. Transitions only move forward;
/// `Accepted` and `Rejected` are terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum GuidelineState {
    Generated,
    SourceVerified,
    Translated,
    Accepted,
    Rejected { reason: RejectReason },
}

impl GuidelineState {
    fn name(&self) -> &'static str {
        match self {
            Self::Generated => "generated",
            Self::SourceVerified => "source_verified",
            Self::Translated => "translated",
            Self::Accepted => "accepted",
            Self::Rejected { .. } => "rejected",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Self::Accepted | Self::Rejected { .. })
    }
}

impl fmt::Display for GuidelineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A guideline bundle with its generated source, optional translation,
/// and where it stands in the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiableSample {
    pub id: String,
    pub bundle: GuidelineBundle,
    pub lp0: LanguageTag,
    pub lp1: LanguageTag,
    pub source_text: String,
    pub translation: Option<String>,
    pub state: GuidelineState,
}

impl VerifiableSample {
    pub fn new(
        id: impl Into<String>,
        bundle: GuidelineBundle,
        lp0: LanguageTag,
        lp1: LanguageTag,
        source_text: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            bundle,
            lp0,
            lp1,
            source_text: source_text.into(),
            translation: None,
            state: GuidelineState::Generated,
        }
    }

    fn step(&mut self, expected: GuidelineState, next: GuidelineState) -> Result<(), GuidelineError> {
        if self.state != expected {
            return Err(GuidelineError::InvalidTransition {
                from: self.state.to_string(),
                to: next.name(),
            });
        }
        self.state = next;
        Ok(())
    }

    pub fn verify_source(&mut self) -> Result<(), GuidelineError> {
        self.step(GuidelineState::Generated, GuidelineState::SourceVerified)
    }

    pub fn attach_translation(&mut self, text: impl Into<String>) -> Result<(), GuidelineError> {
        self.step(GuidelineState::SourceVerified, GuidelineState::Translated)?;
        self.translation = Some(text.into());
        Ok(())
    }

    pub fn accept(&mut self) -> Result<(), GuidelineError> {
        self.step(GuidelineState::Translated, GuidelineState::Accepted)
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self.state, GuidelineState::Accepted)
    }

    pub fn reject(&mut self, reason: RejectReason) -> Result<(), GuidelineError> {
        if self.state.is_terminal() {
            return Err(GuidelineError::InvalidTransition {
                from: self.state.to_string(),
                to: "rejected",
            });
        }
        self.state = GuidelineState::Rejected { reason };
        Ok(())
    }
}

/// Ids of bundle guidelines the source text already satisfies. A clean
/// source returns an empty list; anything else means the sample carries
/// no signal and is rejected before the judge ever sees it.
pub fn local_precheck(bundle: &GuidelineBundle, source_text: &str) -> Vec<String> {
    bundle
        .guidelines
        .iter()
        .filter(|g| g.matches(source_text))
        .map(|g| g.id().to_owned())
        .collect()
}

/// Endpoint ids the production pipeline talks to: an instruction-tuned
/// generator (also used for translation), a judge, and a quality model.
#[derive(Debug, Clone)]
pub struct VerifiableEndpoints {
    pub generator: String,
    pub judge: String,
    pub quality: String,
}

#[derive(Debug, Clone)]
pub struct ProduceOptions {
    pub quality_gate: f64,
    pub workers: usize,
    pub generation: GenParams,
    pub judge: GenParams,
    pub translation: GenParams,
}

impl Default for ProduceOptions {
    fn default() -> Self {
        Self {
            quality_gate: 0.8,
            workers: 4,
            generation: GenParams::default(),
            judge: GenParams::default(),
            translation: GenParams::default(),
        }
    }
}

/// How a batch of samples moved through the funnel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub requested: usize,
    pub precheck_rejected: usize,
    pub judge_rejected: usize,
    pub judge_unparseable: usize,
    pub translation_rejected: usize,
    pub quality_rejected: usize,
    pub accepted: usize,
}

pub fn tally(samples: &[VerifiableSample]) -> FunnelCounts {
    let mut counts = FunnelCounts { requested: samples.len(), ..FunnelCounts::default() };
    for sample in samples {
        match &sample.state {
            GuidelineState::Accepted => counts.accepted += 1,
            GuidelineState::Rejected { reason } => match reason {
                RejectReason::SourceAlreadyCompliant { detected_by: Detector::Precheck, .. } => {
                    counts.precheck_rejected += 1
                }
                RejectReason::SourceAlreadyCompliant { detected_by: Detector::Judge, .. } => {
                    counts.judge_rejected += 1
                }
                RejectReason::JudgeUnparseable => counts.judge_unparseable += 1,
                RejectReason::TranslationMissingPattern { .. } => {
                    counts.translation_rejected += 1
                }
                RejectReason::QualityBelowGate { .. } => counts.quality_rejected += 1,
            },
            _ => {}
        }
    }
    counts
}

fn seeded(params: &GenParams, sample_seed: u64) -> GenParams {
    let mut p = params.clone();
    if p.temperature != 0.0 && p.seed.is_none() {
        p.seed = Some(sample_seed);
    }
    p
}

fn run_one(
    gateway: &Gateway,
    endpoints: &VerifiableEndpoints,
    catalog: &Catalog,
    topics: &[TopicPair],
    lp0: &LanguageTag,
    lp1: &LanguageTag,
    seed: u64,
    index: usize,
    options: &ProduceOptions,
) -> Result<VerifiableSample, GuidelineError> {
    let mut rng = sample_rng(seed, index);
    let bundle = sample_bundle(catalog, topics, &mut rng)?;
    let sample_seed = stable_u64(&["gen-seed", &seed.to_string(), &index.to_string()]);
    let id = format!("vs-{seed:016x}-{index:05}");

    let prompt = Conversation::from_prompt(prompts::build_generation_prompt(&bundle), PIPELINE_DATASET);
    let texts =
        gateway.generate(&endpoints.generator, &prompt, &seeded(&options.generation, sample_seed))?;
    let reply = prompts::parse_generation(&texts[0]).map_err(|_| GatewayError::MalformedResponse {
        endpoint: endpoints.generator.clone(),
        message: "generator reply lacks the source/guidelines markers".into(),
    })?;
    let mut sample = VerifiableSample::new(id, bundle, lp0.clone(), lp1.clone(), reply.source_text);

    let compliant = local_precheck(&sample.bundle, &sample.source_text);
    if !compliant.is_empty() {
        sample.reject(RejectReason::SourceAlreadyCompliant {
            detected_by: Detector::Precheck,
            guideline_ids: compliant,
        })?;
        return Ok(sample);
    }

    let prompt = Conversation::from_prompt(
        prompts::build_verification_prompt(&sample.bundle, &sample.source_text),
        PIPELINE_DATASET,
    );
    let texts = gateway.generate(&endpoints.judge, &prompt, &seeded(&options.judge, sample_seed))?;
    match prompts::parse_verification(&texts[0]) {
        Err(_) => {
            sample.reject(RejectReason::JudgeUnparseable)?;
            return Ok(sample);
        }
        Ok(true) => {
            sample.reject(RejectReason::SourceAlreadyCompliant {
                detected_by: Detector::Judge,
                guideline_ids: Vec::new(),
            })?;
            return Ok(sample);
        }
        Ok(false) => sample.verify_source()?,
    }

    let prompt = Conversation::from_prompt(
        prompts::build_translation_prompt(&sample.bundle, &sample.source_text, lp0, lp1),
        PIPELINE_DATASET,
    );
    let texts =
        gateway.generate(&endpoints.generator, &prompt, &seeded(&options.translation, sample_seed))?;
    sample.attach_translation(texts[0].clone())?;
    let translation = sample.translation.clone().unwrap_or_default();

    if let Some(missing) = sample.bundle.guidelines.iter().find(|g| !g.matches(&translation)) {
        let guideline_id = missing.id().to_owned();
        sample.reject(RejectReason::TranslationMissingPattern { guideline_id })?;
        return Ok(sample);
    }

    let request = ScoreRequest {
        source: Some(sample.source_text.clone()),
        hypothesis: translation,
        reference: None,
        lp: Some(format!("{}-{}", lp0.code(), lp1.code())),
    };
    let score = gateway.score(&endpoints.quality, &request)?;
    if score.passes(options.quality_gate) {
        sample.accept()?;
    } else {
        sample.reject(RejectReason::QualityBelowGate { value: score.value() })?;
    }
    Ok(sample)
}

/// Runs the whole funnel for `count` seeded samples: draw a bundle,
/// generate a source, precheck it, have the judge confirm it follows
/// none of its guidelines, translate, check every pattern against the
/// translation, then gate on estimated quality. Every sample comes back
/// with a terminal state; the order matches the sample indices.
#[allow(clippy::too_many_arguments)]
pub fn produce_samples(
    gateway: &Gateway,
    endpoints: &VerifiableEndpoints,
    catalog: &Catalog,
    topics: &[TopicPair],
    lp0: &LanguageTag,
    lp1: &LanguageTag,
    count: usize,
    seed: u64,
    options: &ProduceOptions,
) -> Result<Vec<VerifiableSample>, GuidelineError> {
    if catalog.is_empty() {
        return Err(GuidelineError::EmptyCatalog);
    }
    if topics.is_empty() {
        return Err(GuidelineError::EmptyTopics);
    }
    gateway.info(&endpoints.quality)?;
    let indices: Vec<usize> = (0..count).collect();
    let results = par_map_ordered(indices, options.workers, |_, index| {
        run_one(gateway, endpoints, catalog, topics, lp0, lp1, seed, index, options)
    });
    results.into_iter().collect()
}
