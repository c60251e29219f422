//! Dataset types, line-delimited record IO, and validation.
//!
//! A dataset is a set of adverse-event reports, each carrying a free-text
//! narrative and a list of suggested standard terms, optionally paired with
//! gold annotations mapping standard terms to the mention phrases a human
//! marked in the narrative.

mod ingest;
mod stats;

pub use ingest::ingest_vaers;
pub use stats::{
    build_subset, compute_stats, symptom_count_histogram, symptom_frequencies, ColumnStats,
    DatasetStats, SubsetSelector,
};

use crate::distill::normalize_term;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error for report '{report_id}': {reason}")]
    Validation { report_id: String, reason: String },

    #[error("missing required column '{column}' in {table}")]
    Schema { table: String, column: String },

    #[error("duplicate report id '{0}'")]
    DuplicateId(String),

    #[error("dataset is empty")]
    EmptyInput,

    #[error("dataset has no gold annotations")]
    EmptyGold,

    #[error("k = {k} exceeds the {distinct} distinct gold terms")]
    Range { k: usize, distinct: usize },
}

/// A standard-vocabulary symptom term suggested for one report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestedTerm {
    pub term: String,
    pub code: Option<String>,
}

impl SuggestedTerm {
    pub fn new(term: impl Into<String>) -> Self {
        Self {
            term: term.into(),
            code: None,
        }
    }
}

/// One adverse-event report: narrative text plus its suggested term list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub id: String,
    pub text: String,
    pub suggested: Vec<SuggestedTerm>,
}

impl Report {
    /// Normalized forms of the suggested terms, in report order.
    pub fn suggested_normalized(&self) -> Vec<String> {
        self.suggested
            .iter()
            .map(|s| normalize_term(&s.term))
            .collect()
    }
}

/// Human-verified mapping from standard term to the mention phrases
/// annotated in the report text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldAnnotation {
    pub report_id: String,
    pub links: BTreeMap<String, Vec<String>>,
}

impl GoldAnnotation {
    /// Normalized gold term keys.
    pub fn terms_normalized(&self) -> Vec<String> {
        let mut out: Vec<String> = self.links.keys().map(|t| normalize_term(t)).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// A named collection of reports with their gold annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub reports: Vec<Report>,
    pub gold: BTreeMap<String, GoldAnnotation>,
}

impl Dataset {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            reports: Vec::new(),
            gold: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn report(&self, id: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.id == id)
    }

    pub fn gold_for(&self, id: &str) -> Option<&GoldAnnotation> {
        self.gold.get(id)
    }

    /// Check every type invariant, naming the offending report.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for report in &self.reports {
            if !seen.insert(report.id.clone()) {
                return Err(CorpusError::DuplicateId(report.id.clone()));
            }
            validate_report(report)?;
            if let Some(gold) = self.gold.get(&report.id) {
                validate_gold(report, gold)?;
            }
        }
        for id in self.gold.keys() {
            if !seen.contains(id) {
                return Err(CorpusError::Validation {
                    report_id: id.clone(),
                    reason: "gold annotation references a missing report".into(),
                });
            }
        }
        Ok(())
    }
}

fn validate_report(report: &Report) -> Result<(), CorpusError> {
    let fail = |reason: &str| {
        Err(CorpusError::Validation {
            report_id: report.id.clone(),
            reason: reason.into(),
        })
    };
    if report.id.trim().is_empty() {
        return fail("empty report id");
    }
    if report.text.trim().is_empty() {
        return fail("empty clinical text");
    }
    if report.suggested.is_empty() {
        return fail("empty suggested term list");
    }
    let mut seen = BTreeSet::new();
    for s in &report.suggested {
        let norm = normalize_term(&s.term);
        if norm.is_empty() {
            return fail("suggested term empty after normalization");
        }
        if !seen.insert(norm) {
            return fail("duplicate suggested term under normalization");
        }
    }
    Ok(())
}

fn validate_gold(report: &Report, gold: &GoldAnnotation) -> Result<(), CorpusError> {
    let fail = |reason: String| {
        Err(CorpusError::Validation {
            report_id: report.id.clone(),
            reason,
        })
    };
    let suggested: BTreeSet<String> = report
        .suggested
        .iter()
        .map(|s| normalize_term(&s.term))
        .collect();
    for (term, mentions) in &gold.links {
        if !suggested.contains(&normalize_term(term)) {
            return fail(format!("gold term '{term}' is not in the suggested list"));
        }
        if mentions.is_empty() {
            return fail(format!("gold term '{term}' has an empty mention list"));
        }
        if mentions.iter().any(|m| m.trim().is_empty()) {
            return fail(format!("gold term '{term}' has an empty mention string"));
        }
    }
    Ok(())
}

/// On-disk line record. `gold` is absent for unannotated corpora.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    text: String,
    suggested: Vec<SuggestedTerm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold: Option<BTreeMap<String, Vec<String>>>,
}

/// Load a line-delimited dataset file, rejecting invariant violations.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let mut dataset = Dataset::new(name);
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordLine =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let report = Report {
            id: record.id.clone(),
            text: record.text,
            suggested: record.suggested,
        };
        if dataset.report(&report.id).is_some() {
            return Err(CorpusError::DuplicateId(report.id));
        }
        if let Some(links) = record.gold {
            dataset.gold.insert(
                record.id.clone(),
                GoldAnnotation {
                    report_id: record.id,
                    links,
                },
            );
        }
        dataset.reports.push(report);
    }
    dataset.validate()?;
    Ok(dataset)
}

/// Write a dataset in canonical line-delimited form. Loading the result and
/// saving it again reproduces the bytes.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for report in &dataset.reports {
        let record = RecordLine {
            id: report.id.clone(),
            text: report.text.clone(),
            suggested: report.suggested.clone(),
            gold: dataset.gold.get(&report.id).map(|g| g.links.clone()),
        };
        let line = serde_json::to_string(&record).expect("record serialization cannot fail");
        writeln!(writer, "{line}").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)?;
    Ok(())
}
