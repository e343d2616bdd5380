//! Guideline specs: small text files describing one verifiable text
//! transformation each, with a regex that checks whether the
//! transformation was applied. A starter catalog covering 31 categories
//! ships embedded in the crate; user catalogs load from a directory in
//! the same format.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{origin}: missing key {key}")]
    MissingKey { origin: String, key: &'static str },
    #[error("{origin}: duplicate key {key}")]
    DuplicateKey { origin: String, key: String },
    #[error("{origin}: unknown key {key}")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: line {line} is not a `KEY: value` entry")]
    BadLine { origin: String, line: usize },
    #[error("{origin}: REQUIRES_EXAMPLE must be true or false, got {value:?}")]
    BadBool { origin: String, value: String },
    #[error("{origin}: verification regex does not compile: {message}")]
    RegexCompile { origin: String, message: String },
    #[error("guideline id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// One verifiable transformation: what to do, how to check it was done,
/// and a worked example. The example pair doubles as a self-test fixture:
/// the output must match the verification regex and the input must not.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct GuidelineSpec {
    id: String,
    category: String,
    name: String,
    description: String,
    requires_example: bool,
    pattern: String,
    #[serde(skip)]
    regex: Regex,
    example_input: String,
    example_output: String,
}

impl PartialEq for GuidelineSpec {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.category == other.category
            && self.name == other.name
            && self.description == other.description
            && self.requires_example == other.requires_example
            && self.pattern == other.pattern
            && self.example_input == other.example_input
            && self.example_output == other.example_output
    }
}

impl GuidelineSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        category: impl Into<String>,
        name: impl Into<String>,
        description: impl Into<String>,
        requires_example: bool,
        pattern: impl Into<String>,
        example_input: impl Into<String>,
        example_output: impl Into<String>,
    ) -> Result<Self, CatalogError> {
        let id = id.into();
        let pattern = pattern.into();
        let regex = Regex::new(&pattern).map_err(|e| CatalogError::RegexCompile {
            origin: id.clone(),
            message: e.to_string(),
        })?;
        Ok(Self {
            id,
            category: category.into(),
            name: name.into(),
            description: description.into(),
            requires_example,
            pattern,
            regex,
            example_input: example_input.into(),
            example_output: example_output.into(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn requires_example(&self) -> bool {
        self.requires_example
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn example_input(&self) -> &str {
        &self.example_input
    }

    pub fn example_output(&self) -> &str {
        &self.example_output
    }

    /// Whether the transformation shows up in `text`.
    pub fn matches(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }

    /// The example's own round trip: output transformed, input not.
    pub fn self_consistent(&self) -> bool {
        self.matches(&self.example_output) && !self.matches(&self.example_input)
    }

    /// How the guideline reads inside a prompt, e.g.
    /// `[Date Formatting] Convert dates to MM/DD/YYYY` with the example
    /// appended when the spec requires one.
    pub fn prompt_line(&self) -> String {
        let mut line = format!("[{}] {}", self.category, self.description);
        if self.requires_example {
            line.push_str(&format!(
                ", e.g., '{}' -> '{}'",
                self.example_input, self.example_output
            ));
        }
        line
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    id: String,
    category: String,
    name: String,
    description: String,
    requires_example: bool,
    verification: String,
    example_input: String,
    example_output: String,
}

impl TryFrom<RawSpec> for GuidelineSpec {
    type Error = CatalogError;
    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        GuidelineSpec::new(
            raw.id,
            raw.category,
            raw.name,
            raw.description,
            raw.requires_example,
            raw.verification,
            raw.example_input,
            raw.example_output,
        )
    }
}

impl From<GuidelineSpec> for RawSpec {
    fn from(spec: GuidelineSpec) -> Self {
        RawSpec {
            id: spec.id,
            category: spec.category,
            name: spec.name,
            description: spec.description,
            requires_example: spec.requires_example,
            verification: spec.pattern,
            example_input: spec.example_input,
            example_output: spec.example_output,
        }
    }
}

/// Parses the on-disk spec format: `KEY: value` lines, one spec per file.
/// `origin` names the file in error messages.
pub fn parse_spec(text: &str, origin: &str) -> Result<GuidelineSpec, CatalogError> {
    const KEYS: [&str; 8] = [
        "CATEGORY",
        "ID",
        "NAME",
        "DESCRIPTION",
        "REQUIRES_EXAMPLE",
        "VERIFICATION",
        "EXAMPLE_INPUT",
        "EXAMPLE_OUTPUT",
    ];
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(CatalogError::BadLine { origin: origin.to_owned(), line: i + 1 });
        };
        let key = key.trim();
        let Some(&canonical) = KEYS.iter().find(|k| **k == key) else {
            return Err(CatalogError::UnknownKey { origin: origin.to_owned(), key: key.to_owned() });
        };
        if values.insert(canonical, value.trim().to_owned()).is_some() {
            return Err(CatalogError::DuplicateKey { origin: origin.to_owned(), key: key.to_owned() });
        }
    }
    let mut take = |key: &'static str| {
        values.remove(key).ok_or(CatalogError::MissingKey { origin: origin.to_owned(), key })
    };
    let category = take("CATEGORY")?;
    let id = take("ID")?;
    let name = take("NAME")?;
    let description = take("DESCRIPTION")?;
    let requires_raw = take("REQUIRES_EXAMPLE")?;
    let requires_example = match requires_raw.to_ascii_lowercase().as_str() {
        "true" => true,
        "false" => false,
        _ => return Err(CatalogError::BadBool { origin: origin.to_owned(), value: requires_raw }),
    };
    let pattern = take("VERIFICATION")?;
    let example_input = take("EXAMPLE_INPUT")?;
    let example_output = take("EXAMPLE_OUTPUT")?;
    GuidelineSpec::new(
        id,
        category,
        name,
        description,
        requires_example,
        pattern,
        example_input,
        example_output,
    )
}

/// A spec that fails its own example round trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfCheckFailure {
    pub id: String,
    pub output_matches: bool,
    pub input_matches: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    by_id: BTreeMap<String, GuidelineSpec>,
    categories: Vec<String>,
}

impl Catalog {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_specs(specs: Vec<GuidelineSpec>) -> Result<Self, CatalogError> {
        let mut catalog = Self::empty();
        for spec in specs {
            catalog.insert(spec)?;
        }
        Ok(catalog)
    }

    fn insert(&mut self, spec: GuidelineSpec) -> Result<(), CatalogError> {
        if self.by_id.contains_key(spec.id()) {
            return Err(CatalogError::DuplicateId(spec.id().to_owned()));
        }
        if !self.categories.iter().any(|c| c == spec.category()) {
            self.categories.push(spec.category().to_owned());
            self.categories.sort();
        }
        self.by_id.insert(spec.id().to_owned(), spec);
        Ok(())
    }

    /// Loads every `*.txt` file under `dir` as one spec each.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir)
            .map_err(|source| CatalogError::Io { path: dir.to_path_buf(), source })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        paths.sort();
        let mut catalog = Self::empty();
        for path in paths {
            let text = std::fs::read_to_string(&path)
                .map_err(|source| CatalogError::Io { path: path.clone(), source })?;
            catalog.insert(parse_spec(&text, &path.display().to_string())?)?;
        }
        Ok(catalog)
    }

    pub fn get(&self, id: &str) -> Option<&GuidelineSpec> {
        self.by_id.get(id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Category names, sorted, deduplicated.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn by_category(&self, category: &str) -> Vec<&GuidelineSpec> {
        self.by_id.values().filter(|s| s.category() == category).collect()
    }

    pub fn specs(&self) -> impl Iterator<Item = &GuidelineSpec> {
        self.by_id.values()
    }

    /// Runs every spec's example round trip, returning the failures.
    pub fn self_check(&self) -> Vec<SelfCheckFailure> {
        self.by_id
            .values()
            .filter(|s| !s.self_consistent())
            .map(|s| SelfCheckFailure {
                id: s.id().to_owned(),
                output_matches: s.matches(s.example_output()),
                input_matches: s.matches(s.example_input()),
            })
            .collect()
    }
}

macro_rules! embedded_specs {
    ($($file:literal),+ $(,)?) => {
        [$((concat!("catalog/", $file), include_str!(concat!("../../catalog/", $file)))),+]
    };
}

/// The embedded starter catalog: one spec per shipped category.
pub fn builtin_catalog() -> Catalog {
    let files = embedded_specs![
        "brand_001.txt",
        "case_001.txt",
        "chem_001.txt",
        "cite_001.txt",
        "code_001.txt",
        "date_001.txt",
        "email_001.txt",
        "emoji_001.txt",
        "fin_001.txt",
        "geo_001.txt",
        "legal_001.txt",
        "list_001.txt",
        "loc_001.txt",
        "math_001.txt",
        "music_001.txt",
        "note_001.txt",
        "num_001.txt",
        "path_001.txt",
        "phone_001.txt",
        "rescite_001.txt",
        "social_001.txt",
        "spec_001.txt",
        "sport_001.txt",
        "struct_001.txt",
        "tech_001.txt",
        "temp_001.txt",
        "term_001.txt",
        "time_001.txt",
        "unit_001.txt",
        "url_001.txt",
        "ver_001.txt",
    ];
    let specs = files
        .iter()
        .map(|(origin, text)| parse_spec(text, origin).expect("embedded specs parse"))
        .collect();
    Catalog::from_specs(specs).expect("embedded specs have unique ids")
}
