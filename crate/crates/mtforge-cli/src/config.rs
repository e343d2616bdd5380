//! Run configuration: one TOML file naming the scoring services and the
//! knobs for each pipeline stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use mtforge::eval::chrf::ChrfOptions;
use mtforge::eval::report::{standard_groups, LanguageGroup};
use mtforge::gateway::EndpointConfig;
use mtforge::model::LanguageTag;
use mtforge::rewards::RewardMode;
use mtforge::sft::KeepPolicy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path} is not valid TOML: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("config has no [endpoints.{0}] section")]
    MissingRole(String),
    #[error("endpoint {0} has an empty base_url")]
    EmptyBaseUrl(String),
    #[error("run.workers must be at least 1")]
    NoWorkers,
    #[error("{field} must be between 0 and 1, got {value}")]
    BadGate { field: &'static str, value: f64 },
    #[error("mbr.temperature must be a finite non-negative number, got {0}")]
    BadTemperature(f64),
    #[error("mbr.num_candidates must be at least 2, got {0}")]
    BadCandidates(usize),
    #[error("chrf.max_ngram must be at least 1")]
    BadNgramOrder,
    #[error("chrf.beta must be a finite non-negative number, got {0}")]
    BadBeta(f64),
    #[error("rewards.mode must be \"strict\" or \"fractional\", got {0:?}")]
    BadRewardMode(String),
    #[error("language group {0:?} has no members")]
    EmptyGroup(String),
    #[error("bad language in [verifiable]: {0}")]
    BadLanguage(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub offline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn default_workers() -> usize {
    4
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, workers: 4, offline: false, cache_dir: None }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub base_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageSection {
    pub code: String,
    pub name: String,
}

impl LanguageSection {
    pub fn tag(&self) -> Result<LanguageTag, ConfigError> {
        LanguageTag::new(&self.code, &self.name)
            .map_err(|e| ConfigError::BadLanguage(e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifiableSection {
    #[serde(default = "default_quality_gate")]
    pub quality_gate: f64,
    #[serde(default = "default_source_language")]
    pub source_language: LanguageSection,
    #[serde(default = "default_target_language")]
    pub target_language: LanguageSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topics_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_dir: Option<PathBuf>,
}

fn default_quality_gate() -> f64 {
    0.8
}

fn default_source_language() -> LanguageSection {
    LanguageSection { code: "en".into(), name: "English".into() }
}

fn default_target_language() -> LanguageSection {
    LanguageSection { code: "de".into(), name: "German".into() }
}

impl Default for VerifiableSection {
    fn default() -> Self {
        Self {
            quality_gate: 0.8,
            source_language: default_source_language(),
            target_language: default_target_language(),
            topics_file: None,
            catalog_dir: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    #[serde(default = "default_quality_gate")]
    pub gate_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { gate_threshold: 0.8, template_dir: None }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SftSection {
    #[serde(default = "default_min_score")]
    pub min_reasoning: u8,
    #[serde(default = "default_min_score")]
    pub min_readability: u8,
    #[serde(default = "default_allowlist")]
    pub allowlist: Vec<String>,
}

fn default_min_score() -> u8 {
    4
}

fn default_allowlist() -> Vec<String> {
    vec!["OpenHermes-2.5".to_owned()]
}

impl Default for SftSection {
    fn default() -> Self {
        Self {
            min_reasoning: 4,
            min_readability: 4,
            allowlist: default_allowlist(),
        }
    }
}

impl SftSection {
    pub fn policy(&self) -> KeepPolicy {
        KeepPolicy {
            min_reasoning: self.min_reasoning,
            min_readability: self.min_readability,
            allowlist: self.allowlist.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MbrSection {
    #[serde(default = "default_num_candidates")]
    pub num_candidates: usize,
    #[serde(default = "default_mbr_temperature")]
    pub temperature: f64,
}

fn default_num_candidates() -> usize {
    24
}

fn default_mbr_temperature() -> f64 {
    1.0
}

impl Default for MbrSection {
    fn default() -> Self {
        Self { num_candidates: 24, temperature: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSection {
    #[serde(default = "default_reward_mode")]
    pub mode: String,
    #[serde(default = "default_quality_gate")]
    pub quality_gate: f64,
}

fn default_reward_mode() -> String {
    "strict".to_owned()
}

impl Default for RewardSection {
    fn default() -> Self {
        Self { mode: "strict".into(), quality_gate: 0.8 }
    }
}

impl RewardSection {
    pub fn reward_mode(&self) -> Result<RewardMode, ConfigError> {
        match self.mode.as_str() {
            "strict" => Ok(RewardMode::Strict),
            "fractional" => Ok(RewardMode::Fractional),
            other => Err(ConfigError::BadRewardMode(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChrfSection {
    #[serde(default = "default_max_ngram")]
    pub max_ngram: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_max_ngram() -> usize {
    6
}

fn default_beta() -> f64 {
    2.0
}

impl Default for ChrfSection {
    fn default() -> Self {
        Self { max_ngram: 6, beta: 2.0 }
    }
}

impl ChrfSection {
    pub fn options(&self) -> ChrfOptions {
        ChrfOptions { max_ngram: self.max_ngram, beta: self.beta }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub name: String,
    pub members: Vec<String>,
}

/// The full run configuration. Every section is optional in the file;
/// missing sections take their defaults.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub endpoints: BTreeMap<String, EndpointSection>,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub verifiable: VerifiableSection,
    #[serde(default)]
    pub sft: SftSection,
    #[serde(default)]
    pub mbr: MbrSection,
    #[serde(default)]
    pub rewards: RewardSection,
    #[serde(default)]
    pub chrf: ChrfSection,
    #[serde(default)]
    pub language_groups: Vec<GroupSection>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.workers == 0 {
            return Err(ConfigError::NoWorkers);
        }
        for (id, endpoint) in &self.endpoints {
            if endpoint.base_url.trim().is_empty() {
                return Err(ConfigError::EmptyBaseUrl(id.clone()));
            }
        }
        for (field, value) in [
            ("verifiable.quality_gate", self.verifiable.quality_gate),
            ("corpus.gate_threshold", self.corpus.gate_threshold),
            ("rewards.quality_gate", self.rewards.quality_gate),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ConfigError::BadGate { field, value });
            }
        }
        if !self.mbr.temperature.is_finite() || self.mbr.temperature < 0.0 {
            return Err(ConfigError::BadTemperature(self.mbr.temperature));
        }
        if self.mbr.num_candidates < 2 {
            return Err(ConfigError::BadCandidates(self.mbr.num_candidates));
        }
        if self.chrf.max_ngram == 0 {
            return Err(ConfigError::BadNgramOrder);
        }
        if !self.chrf.beta.is_finite() || self.chrf.beta < 0.0 {
            return Err(ConfigError::BadBeta(self.chrf.beta));
        }
        self.rewards.reward_mode()?;
        self.verifiable.source_language.tag()?;
        self.verifiable.target_language.tag()?;
        for group in &self.language_groups {
            if group.members.is_empty() {
                return Err(ConfigError::EmptyGroup(group.name.clone()));
            }
        }
        Ok(())
    }

    pub fn endpoint_section(&self, role: &str) -> Result<&EndpointSection, ConfigError> {
        self.endpoints
            .get(role)
            .ok_or_else(|| ConfigError::MissingRole(role.to_owned()))
    }

    /// Builds the gateway endpoint settings for a role from its section.
    pub fn endpoint_config(&self, role: &str) -> Result<EndpointConfig, ConfigError> {
        let section = self.endpoint_section(role)?;
        let mut config = EndpointConfig::new(section.base_url.clone());
        config.auth_token_env = section.auth_token_env.clone();
        if let Some(secs) = section.timeout_secs {
            config.timeout = Duration::from_secs(secs);
        }
        if let Some(retries) = section.max_retries {
            config.max_retries = retries;
        }
        config.requests_per_minute = section.requests_per_minute;
        config.max_in_flight = section.max_in_flight;
        Ok(config)
    }

    /// The aggregation tiers for score tables: configured groups, or the
    /// standard high-resource/extended/full tiers when none are listed.
    pub fn groups(&self) -> Vec<LanguageGroup> {
        if self.language_groups.is_empty() {
            return standard_groups();
        }
        self.language_groups
            .iter()
            .map(|g| {
                let members: Vec<&str> = g.members.iter().map(String::as_str).collect();
                LanguageGroup::new(&g.name, &members)
            })
            .collect()
    }
}

/// A fully commented starter configuration, written by `config-init`.
pub const TEMPLATE: &str = r#"# mtforge run configuration.
# Every section is optional; omitted keys take the defaults shown here.

[run]
seed = 0
workers = 4
# Run every command against deterministic built-in stand-ins instead of
# live services. Commands also accept --offline.
offline = false
# Uncomment to cache service responses on disk between runs.
# cache_dir = ".mtforge-cache"

# One section per service role. Commands look up the roles they need:
#   corpus-prep      quality
#   gen-verifiable   generator, judge, quality
#   curate-sft       judge, reward
#   build-prefs      mbr_metric, check_metric, judge (and generator when
#                    candidate pools need sampling)
#   reward-batch     reward
#   gen-ifmt         generator
#   eval-ifmt        judge, quality
#   arena-winrate    judge
#
# [endpoints.generator]
# base_url = "http://localhost:9001"
# # Name of the env var holding a bearer token, if the service needs one.
# # auth_token_env = "MTFORGE_TOKEN"
# # timeout_secs = 30
# # max_retries = 2
# # requests_per_minute = 600
# # max_in_flight = 8

[corpus]
gate_threshold = 0.8
# Directory of extra continued-pretraining templates ({source}/{target}
# placeholders); built-in templates are always available.
# template_dir = "templates"

[verifiable]
quality_gate = 0.8
source_language = { code = "en", name = "English" }
target_language = { code = "de", name = "German" }
# Tab-separated topic<TAB>subtopic file; omit to use the built-in list.
# topics_file = "topics.tsv"
# Directory of extra guideline specs; omit to use the built-in catalog.
# catalog_dir = "guidelines"

[sft]
min_reasoning = 4
min_readability = 4
allowlist = ["OpenHermes-2.5"]

[mbr]
num_candidates = 24
temperature = 1.0

[rewards]
# "strict": all patterns must match for a nonzero reward.
# "fractional": reward is the fraction of patterns matched.
mode = "strict"
quality_gate = 0.8

[chrf]
max_ngram = 6
beta = 2.0

# Aggregation tiers for eval-chrf score tables. Omit to use the standard
# avg7 / avg15 / avg_all tiers.
# [[language_groups]]
# name = "pilot"
# members = ["de_DE", "fr_FR"]
"#;
