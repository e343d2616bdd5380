//! Per-language score tables with cumulative group averages and an
//! aligned text rendering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("group {group} needs a score for {language} but the table has none")]
    UnknownLanguage { group: String, language: String },
    #[error("group {0} has no members")]
    EmptyGroup(String),
    #[error("language {0} already has a score")]
    DuplicateLanguage(String),
    #[error("score for {language} must be finite, got {value}")]
    NotFinite { language: String, value: f64 },
}

/// A named set of languages to average over. Groups are independent;
/// cumulative tiers simply list overlapping members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageGroup {
    pub name: String,
    pub members: Vec<String>,
}

impl LanguageGroup {
    pub fn new(name: impl Into<String>, members: &[&str]) -> Self {
        Self { name: name.into(), members: members.iter().map(|m| (*m).to_owned()).collect() }
    }
}

const HIGH_RESOURCE: [&str; 7] = ["de_DE", "es_MX", "fr_FR", "it_IT", "pt_BR", "ru_RU", "zh_CN"];
const MID_TIER_EXTRA: [&str; 7] = ["cs_CZ", "hi_IN", "is_IS", "ja_JP", "ko_KR", "nl_NL", "uk_UA"];
const FULL_TIER_EXTRA: [&str; 9] =
    ["da_DK", "fi_FI", "hu_HU", "no_NO", "pl_PL", "pt_PT", "ro_RO", "sv_SE", "zh_TW"];

/// The three cumulative reporting tiers: seven high-resource pairs, a
/// second tier adding seven more, and the full tier covering every scored
/// column. The tier names count the shared source language, which is why
/// `avg15` lists fourteen scored pairs.
pub fn standard_groups() -> Vec<LanguageGroup> {
    let mid: Vec<&str> = HIGH_RESOURCE.iter().chain(MID_TIER_EXTRA.iter()).copied().collect();
    let all: Vec<&str> = mid.iter().chain(FULL_TIER_EXTRA.iter()).copied().collect();
    vec![
        LanguageGroup::new("avg7", &HIGH_RESOURCE),
        LanguageGroup::new("avg15", &mid),
        LanguageGroup::new("avg_all", &all),
    ]
}

/// One system's score per language. Insertion rejects duplicates and
/// non-finite values so aggregation never averages garbage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub system: String,
    scores: BTreeMap<String, f64>,
}

impl ScoreTable {
    pub fn new(system: impl Into<String>) -> Self {
        Self { system: system.into(), scores: BTreeMap::new() }
    }

    pub fn from_rows(system: impl Into<String>, rows: &[(&str, f64)]) -> Result<Self, ReportError> {
        let mut table = Self::new(system);
        for (language, value) in rows {
            table.insert(language, *value)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, language: &str, value: f64) -> Result<(), ReportError> {
        if !value.is_finite() {
            return Err(ReportError::NotFinite { language: language.to_owned(), value });
        }
        if self.scores.contains_key(language) {
            return Err(ReportError::DuplicateLanguage(language.to_owned()));
        }
        self.scores.insert(language.to_owned(), value);
        Ok(())
    }

    pub fn get(&self, language: &str) -> Option<f64> {
        self.scores.get(language).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(String::as_str)
    }

    pub fn group_mean(&self, group: &LanguageGroup) -> Result<f64, ReportError> {
        if group.members.is_empty() {
            return Err(ReportError::EmptyGroup(group.name.clone()));
        }
        let mut sum = 0.0;
        for member in &group.members {
            sum += self.get(member).ok_or_else(|| ReportError::UnknownLanguage {
                group: group.name.clone(),
                language: member.clone(),
            })?;
        }
        Ok(sum / group.members.len() as f64)
    }

    pub fn aggregate(&self, groups: &[LanguageGroup]) -> Result<Vec<(String, f64)>, ReportError> {
        groups.iter().map(|group| Ok((group.name.clone(), self.group_mean(group)?))).collect()
    }
}

/// Renders one row per system: group means first, then every language in
/// sorted order. Values print with two decimals; a language absent from a
/// table renders as a dash, though group members must all be present.
pub fn render_table(tables: &[ScoreTable], groups: &[LanguageGroup]) -> Result<String, ReportError> {
    let mut languages: BTreeSet<&str> = BTreeSet::new();
    for table in tables {
        languages.extend(table.languages());
    }
    let mut header: Vec<String> = vec!["system".into()];
    header.extend(groups.iter().map(|g| g.name.clone()));
    header.extend(languages.iter().map(|l| (*l).to_owned()));
    let mut rows: Vec<Vec<String>> = vec![header];
    for table in tables {
        let mut row = vec![table.system.clone()];
        for (_, mean) in table.aggregate(groups)? {
            row.push(format!("{mean:.2}"));
        }
        for language in &languages {
            row.push(table.get(language).map_or_else(|| "-".into(), |v| format!("{v:.2}")));
        }
        rows.push(row);
    }
    let mut widths = vec![0usize; rows[0].len()];
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
                out.push_str(&format!("{cell:>width$}", width = widths[i]));
            } else {
                out.push_str(&format!("{cell:<width$}", width = widths[i]));
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_row() -> Vec<(&'static str, f64)> {
        vec![
            ("pt_BR", 65.99),
            ("pt_PT", 63.21),
            ("zh_CN", 39.80),
            ("zh_TW", 32.36),
            ("cs_CZ", 57.11),
            ("da_DK", 66.36),
            ("nl_NL", 62.12),
            ("fi_FI", 62.74),
            ("fr_FR", 65.03),
            ("de_DE", 61.23),
            ("hi_IN", 40.68),
            ("hu_HU", 56.38),
            ("is_IS", 49.57),
            ("it_IT", 66.99),
            ("ja_JP", 34.68),
            ("ko_KR", 34.26),
            ("no_NO", 51.75),
            ("pl_PL", 49.90),
            ("ro_RO", 64.65),
            ("ru_RU", 53.11),
            ("es_MX", 68.65),
            ("sv_SE", 66.54),
            ("uk_UA", 56.22),
        ]
    }

    #[test]
    fn standard_groups_are_cumulative() {
        let groups = standard_groups();
        assert_eq!(groups[0].name, "avg7");
        assert_eq!(groups[0].members.len(), 7);
        assert_eq!(groups[1].name, "avg15");
        assert_eq!(groups[1].members.len(), 14);
        assert_eq!(groups[2].name, "avg_all");
        assert_eq!(groups[2].members.len(), 23);
        for member in &groups[0].members {
            assert!(groups[1].members.contains(member));
        }
        for member in &groups[1].members {
            assert!(groups[2].members.contains(member));
        }
    }

    #[test]
    fn reference_row_reproduces_published_averages() {
        let table = ScoreTable::from_rows("reference", &reference_row()).unwrap();
        let means = table.aggregate(&standard_groups()).unwrap();
        let by_name: BTreeMap<&str, f64> =
            means.iter().map(|(name, value)| (name.as_str(), *value)).collect();
        assert!((by_name["avg7"] - 60.11).abs() < 0.01);
        assert!((by_name["avg15"] - 53.96).abs() < 0.01);
        assert!((by_name["avg_all"] - 55.19).abs() < 0.01);
        assert_eq!(format!("{:.2}", by_name["avg7"]), "60.11");
        assert_eq!(format!("{:.2}", by_name["avg15"]), "53.96");
        assert_eq!(format!("{:.2}", by_name["avg_all"]), "55.19");
    }

    #[test]
    fn group_means_need_every_member() {
        let mut table = ScoreTable::new("partial");
        table.insert("de_DE", 50.0).unwrap();
        let group = LanguageGroup::new("pair", &["de_DE", "fr_FR"]);
        let err = table.group_mean(&group).unwrap_err();
        assert!(
            matches!(err, ReportError::UnknownLanguage { group, language } if group == "pair" && language == "fr_FR")
        );
    }

    #[test]
    fn insert_rejects_duplicates_and_non_finite_values() {
        let mut table = ScoreTable::new("sys");
        table.insert("de_DE", 1.0).unwrap();
        assert!(matches!(
            table.insert("de_DE", 2.0),
            Err(ReportError::DuplicateLanguage(l)) if l == "de_DE"
        ));
        assert!(matches!(
            table.insert("fr_FR", f64::NAN),
            Err(ReportError::NotFinite { language, .. }) if language == "fr_FR"
        ));
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn empty_groups_are_rejected() {
        let table = ScoreTable::from_rows("sys", &[("de_DE", 1.0)]).unwrap();
        let err = table.group_mean(&LanguageGroup::new("none", &[])).unwrap_err();
        assert!(matches!(err, ReportError::EmptyGroup(name) if name == "none"));
    }

    #[test]
    fn single_member_mean_is_the_value() {
        let table = ScoreTable::from_rows("sys", &[("de_DE", 61.23)]).unwrap();
        let group = LanguageGroup::new("solo", &["de_DE"]);
        assert!((table.group_mean(&group).unwrap() - 61.23).abs() < 1e-12);
    }

    #[test]
    fn rendering_aligns_and_dashes_missing_languages() {
        let groups = vec![LanguageGroup::new("pair", &["de_DE", "fr_FR"])];
        let full =
            ScoreTable::from_rows("full", &[("de_DE", 61.2), ("fr_FR", 65.0), ("it_IT", 66.9)])
                .unwrap();
        let narrow =
            ScoreTable::from_rows("narrow", &[("de_DE", 58.0), ("fr_FR", 60.0)]).unwrap();
        let rendered = render_table(&[full, narrow], &groups).unwrap();
        let lines: Vec<&str> = rendered.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("system"));
        assert!(lines[0].contains("pair"));
        assert!(lines[0].contains("it_IT"));
        assert!(lines[1].contains("63.10"));
        assert!(lines[2].ends_with("-"));
        let header_cols = lines[0].split_whitespace().count();
        assert_eq!(header_cols, 5);
        assert_eq!(lines[1].split_whitespace().count(), 5);
    }

    #[test]
    fn reference_rendering_shows_published_means() {
        let table = ScoreTable::from_rows("reference", &reference_row()).unwrap();
        let rendered = render_table(&[table], &standard_groups()).unwrap();
        assert!(rendered.contains("60.11"));
        assert!(rendered.contains("53.96"));
        assert!(rendered.contains("55.19"));
    }
}
