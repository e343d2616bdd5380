//! Turning raw parallel corpora into training text: instruction templates
//! for translation pairs, a quality gate over a QE metric endpoint, and
//! integer budget planning for data mixtures.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ScoreRequest};
use crate::model::ParallelPair;
use crate::pipeline::par_map_ordered;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no template registered under id {0:?}")]
    UnknownTemplate(String),
    #[error("template {template_id:?} is missing the {{{{ {slot} }}}} placeholder")]
    PlaceholderMissing { template_id: String, slot: &'static str },
    #[error("template {template_id:?} contains unsupported placeholder {{{{ {name} }}}}")]
    UnknownPlaceholder { template_id: String, name: String },
    #[error("template id {0:?} registered twice")]
    DuplicateTemplate(String),
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("mixture bucket {bucket:?} needs {budget} items but only {available} are available")]
    InfeasibleMixture { bucket: String, budget: usize, available: usize },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// The placeholder slots a template may use. `source` and `target` are
/// mandatory; the language-name slots are not, since an instruction like
/// "Translate: ..." reads fine without naming the languages.
const SLOTS: [&str; 4] = ["source", "target", "lp0", "lp1"];
const REQUIRED_SLOTS: [&str; 2] = ["source", "target"];

/// An instruction template with `{{ slot }}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: String,
    text: String,
}

impl Template {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, CorpusError> {
        let template = Self { id: id.into(), text: text.into() };
        template.validate()?;
        Ok(template)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let names = placeholder_names(&self.text);
        for slot in REQUIRED_SLOTS {
            if !names.iter().any(|n| n == slot) {
                return Err(CorpusError::PlaceholderMissing { template_id: self.id.clone(), slot });
            }
        }
        // Any {{ ... }} that is not a known slot is a typo we want
        // surfaced at load time, not at render time.
        for name in names {
            if !SLOTS.contains(&name.as_str()) {
                return Err(CorpusError::UnknownPlaceholder { template_id: self.id.clone(), name });
            }
        }
        Ok(())
    }

    /// Substitutes the pair into the template. Language slots render the
    /// human-readable language names, which is what a model should see.
    pub fn render(&self, pair: &ParallelPair) -> String {
        let mut out = String::with_capacity(self.text.len() + pair.source.len() + pair.target.len());
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else {
                // An unclosed brace pair is literal text, same as in
                // placeholder_names.
                break;
            };
            out.push_str(&rest[..start]);
            let name = after[..end].trim();
            out.push_str(match name {
                "source" => &pair.source,
                "target" => &pair.target,
                "lp0" => pair.lp0.display_name(),
                "lp1" => pair.lp1.display_name(),
                other => unreachable!("validated template has no slot {other:?}"),
            });
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        out
    }
}

/// Extracts the trimmed names of every `{{ ... }}` occurrence.
fn placeholder_names(text: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                names.push(after[..end].trim().to_owned());
                rest = &after[end + 2..];
            }
            None => {
                // Unclosed braces read as a literal once no pair closes them.
                break;
            }
        }
    }
    names
}

/// Eight instruction formats shipped with the crate, the seed set for
/// templating translation pairs into trainable text.
const BUILTIN_TEMPLATES: [&str; 8] = [
    "Source: {{ source }}\nTranslate the source text from {{ lp0 }} to {{ lp1 }}.\nTarget: {{ target }}",
    "Source: {{ source }}\nTranslate from {{ lp0 }} to {{ lp1 }}.\nTarget: {{ target }}",
    "Write the text in {{ lp0 }} in {{ lp1 }}.\nText: {{ source }}\nTarget: {{ target }}",
    "Translate the following text from {{ lp0 }} to {{ lp1 }}:\nText: {{ source }}\nTranslation: {{ target }}",
    "Translate the following {{ lp0 }} source text to {{ lp1 }}:\n{{ lp0 }}: {{ source }}\n{{ lp1 }}: {{ target }}",
    "Please translate this text from {{ lp0 }} into {{ lp1 }}.\n{{ lp0 }}: {{ source }}\n{{ lp1 }}: {{ target }}",
    "Make a translation of the given text from {{ lp0 }} to {{ lp1 }}.\n{{ lp0 }}: {{ source }}\n{{ lp1 }}: {{ target }}",
    "{{ lp0 }}: {{ source }}\nTranslate the {{ lp0 }} text above into {{ lp1 }}.\n{{ target }}",
];

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
}

impl TemplateRegistry {
    pub fn empty() -> Self {
        Self { templates: BTreeMap::new() }
    }

    /// Registry preloaded with the built-in formats, ids `builtin-1`
    /// through `builtin-8`.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        for (i, text) in BUILTIN_TEMPLATES.iter().enumerate() {
            let template = Template::new(format!("builtin-{}", i + 1), *text)
                .expect("built-in templates are valid");
            registry.templates.insert(template.id.clone(), template);
        }
        registry
    }

    pub fn insert(&mut self, template: Template) -> Result<(), CorpusError> {
        if self.templates.contains_key(&template.id) {
            return Err(CorpusError::DuplicateTemplate(template.id));
        }
        self.templates.insert(template.id.clone(), template);
        Ok(())
    }

    /// Loads every `*.txt` file in a directory as a template whose id is
    /// the file stem. Returns how many were added.
    pub fn load_dir(&mut self, dir: impl AsRef<Path>) -> Result<usize, CorpusError> {
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir)
            .map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        paths.sort();
        let mut added = 0;
        for path in paths {
            let text = std::fs::read_to_string(&path)
                .map_err(|source| CorpusError::Io { path: path.clone(), source })?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            self.insert(Template::new(id, text.trim_end_matches('\n'))?)?;
            added += 1;
        }
        Ok(added)
    }

    pub fn get(&self, id: &str) -> Result<&Template, CorpusError> {
        self.templates.get(id).ok_or_else(|| CorpusError::UnknownTemplate(id.to_owned()))
    }

    pub fn render(&self, id: &str, pair: &ParallelPair) -> Result<String, CorpusError> {
        Ok(self.get(id)?.render(pair))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Why a pair was dropped by the quality gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkipReason {
    BelowThreshold { value: f64 },
    ScoreFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub reason: SkipReason,
}

#[derive(Debug)]
pub struct GateOutcome {
    pub kept: Vec<ParallelPair>,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone)]
pub struct GateOptions {
    /// Pass mark, interpreted in the metric's own direction.
    pub threshold: f64,
    /// In strict mode a malformed score response aborts the gate; in
    /// lenient mode the pair is skipped with the failure recorded.
    pub strict: bool,
    pub workers: usize,
}

impl GateOptions {
    pub fn new(threshold: f64) -> Self {
        Self { threshold, strict: false, workers: 4 }
    }
}

/// Filters pairs by estimated translation quality. Each pair is scored by
/// the given endpoint (reference-free, source plus target) and kept when
/// the score clears the threshold in the metric's direction.
///
/// Endpoint outages always abort: a gate that silently drops everything
/// because the service was down would corrupt the corpus.
pub fn quality_gate(
    pairs: Vec<ParallelPair>,
    gateway: &Gateway,
    endpoint_id: &str,
    options: &GateOptions,
) -> Result<GateOutcome, CorpusError> {
    // Resolve direction up front so an unreachable endpoint fails fast.
    gateway.info(endpoint_id)?;

    let scored = par_map_ordered(pairs, options.workers, |_, pair| {
        let request = ScoreRequest {
            source: Some(pair.source.clone()),
            hypothesis: pair.target.clone(),
            reference: None,
            lp: Some(format!("{}-{}", pair.lp0.code(), pair.lp1.code())),
        };
        let result = gateway.score(endpoint_id, &request);
        (pair, result)
    });

    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for (index, (pair, result)) in scored.into_iter().enumerate() {
        match result {
            Ok(score) if score.passes(options.threshold) => kept.push(pair),
            Ok(score) => skipped.push(SkipRecord {
                index,
                provenance: pair.provenance.clone(),
                reason: SkipReason::BelowThreshold { value: score.value() },
            }),
            Err(e @ GatewayError::EndpointUnavailable { .. }) => return Err(e.into()),
            Err(e) if options.strict => return Err(e.into()),
            Err(e) => skipped.push(SkipRecord {
                index,
                provenance: pair.provenance.clone(),
                reason: SkipReason::ScoreFailed { message: e.to_string() },
            }),
        }
    }
    Ok(GateOutcome { kept, skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureBucket {
    pub name: String,
    pub weight: f64,
    /// Items actually on hand, if known. Budgets above this are errors.
    pub available: Option<usize>,
}

impl MixtureBucket {
    pub fn new(name: impl Into<String>, weight: f64) -> Self {
        Self { name: name.into(), weight, available: None }
    }

    pub fn with_available(mut self, available: usize) -> Self {
        self.available = Some(available);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixtureAllocation {
    pub name: String,
    pub budget: usize,
}

/// Splits an integer total across weighted buckets. Each bucket gets the
/// floor of its exact share; whatever remains goes to the heaviest bucket
/// (first listed on ties), so the total is always preserved exactly.
pub fn plan_mixture(
    buckets: &[MixtureBucket],
    total: usize,
) -> Result<Vec<MixtureAllocation>, CorpusError> {
    if buckets.is_empty() {
        return Err(CorpusError::InvalidWeights("no buckets given".into()));
    }
    let mut sum = 0.0;
    for bucket in buckets {
        if !bucket.weight.is_finite() || bucket.weight < 0.0 {
            return Err(CorpusError::InvalidWeights(format!(
                "bucket {:?} has weight {}",
                bucket.name, bucket.weight
            )));
        }
        sum += bucket.weight;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
    }

    // The epsilon guards against shares like 0.29 * 100 landing at
    // 28.999999999999996 and flooring one unit short.
    let mut budgets: Vec<usize> =
        buckets.iter().map(|b| (b.weight * total as f64 + 1e-9).floor() as usize).collect();
    let assigned: usize = budgets.iter().sum();
    let remainder = total - assigned.min(total);
    if remainder > 0 {
        let heaviest = buckets
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.weight.partial_cmp(&b.weight).unwrap().then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .expect("nonempty buckets");
        budgets[heaviest] += remainder;
    }

    for (bucket, &budget) in buckets.iter().zip(&budgets) {
        if let Some(available) = bucket.available {
            if budget > available {
                return Err(CorpusError::InfeasibleMixture {
                    bucket: bucket.name.clone(),
                    budget,
                    available,
                });
            }
        }
    }

    Ok(buckets
        .iter()
        .zip(budgets)
        .map(|(b, budget)| MixtureAllocation { name: b.name.clone(), budget })
        .collect())
}
