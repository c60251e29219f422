//! Dataset characterization: summary statistics, term frequencies,
//! frequency-based subsets, and the per-report symptom-count histogram.

use super::{CorpusError, Dataset};
use crate::distill::normalize_term;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Summary of one integer-valued column. The mean keeps full precision;
/// `display_mean` rounds to the nearest integer for table rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub median: u64,
    pub min: u64,
    pub max: u64,
}

impl ColumnStats {
    fn from_values(mut values: Vec<u64>) -> Self {
        assert!(!values.is_empty());
        values.sort_unstable();
        let sum: u64 = values.iter().sum();
        let mean = sum as f64 / values.len() as f64;
        // lower middle element for even-length samples
        let median = values[(values.len() - 1) / 2];
        Self {
            mean,
            median,
            min: values[0],
            max: values[values.len() - 1],
        }
    }

    pub fn display_mean(&self) -> u64 {
        self.mean.round() as u64
    }
}

/// Per-dataset statistics mirroring the three table columns: narrative
/// length in words, gold-linked term count, and (when model results are
/// supplied) extracted term count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub report_count: usize,
    pub text_words: ColumnStats,
    pub gold_terms: ColumnStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extracted_terms: Option<ColumnStats>,
}

impl DatasetStats {
    pub fn render_table(&self, name: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("{name} (# of Reports: {})\n", self.report_count));
        let header = if self.extracted_terms.is_some() {
            "                 Clinical Text  Suggested Symptoms  Extracted Symptoms"
        } else {
            "                 Clinical Text  Suggested Symptoms"
        };
        out.push_str(header);
        out.push('\n');
        let rows: [(&str, fn(&ColumnStats) -> u64); 4] = [
            ("Average Length", |c| c.display_mean()),
            ("Median Length ", |c| c.median),
            ("Min Length    ", |c| c.min),
            ("Max Length    ", |c| c.max),
        ];
        for (label, pick) in rows {
            let mut line = format!(
                "{label}  {:>13}  {:>18}",
                pick(&self.text_words),
                pick(&self.gold_terms)
            );
            if let Some(extracted) = &self.extracted_terms {
                line.push_str(&format!("  {:>18}", pick(extracted)));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// Compute per-column statistics. `extracted` maps report id to the number
/// of terms a model linked for that report; reports absent from the map
/// count as zero extractions.
pub fn compute_stats(
    dataset: &Dataset,
    extracted: Option<&BTreeMap<String, usize>>,
) -> Result<DatasetStats, CorpusError> {
    if dataset.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut words = Vec::with_capacity(dataset.len());
    let mut gold_counts = Vec::with_capacity(dataset.len());
    let mut extracted_counts = Vec::with_capacity(dataset.len());
    for report in &dataset.reports {
        words.push(report.text.split_whitespace().count() as u64);
        let gold_n = dataset
            .gold
            .get(&report.id)
            .map(|g| g.links.len())
            .unwrap_or(0);
        gold_counts.push(gold_n as u64);
        if let Some(map) = extracted {
            extracted_counts.push(map.get(&report.id).copied().unwrap_or(0) as u64);
        }
    }
    Ok(DatasetStats {
        report_count: dataset.len(),
        text_words: ColumnStats::from_values(words),
        gold_terms: ColumnStats::from_values(gold_counts),
        extracted_terms: extracted.map(|_| ColumnStats::from_values(extracted_counts)),
    })
}

/// Rank gold terms by the number of reports whose annotations link them.
/// Descending frequency, ties broken by ascending normalized term.
pub fn symptom_frequencies(dataset: &Dataset) -> Result<Vec<(String, usize)>, CorpusError> {
    if dataset.gold.values().all(|g| g.links.is_empty()) {
        return Err(CorpusError::EmptyGold);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for gold in dataset.gold.values() {
        let mut seen = BTreeSet::new();
        for term in gold.links.keys() {
            let norm = normalize_term(term);
            if seen.insert(norm.clone()) {
                *counts.entry(norm).or_insert(0) += 1;
            }
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Which end of the frequency ranking a subset keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSelector {
    TopK,
    BottomK,
}

/// Keep exactly the reports whose gold links intersect the `k` most (or
/// least) frequent terms. Gold annotations are carried over unmodified.
pub fn build_subset(
    dataset: &Dataset,
    selector: SubsetSelector,
    k: usize,
) -> Result<Dataset, CorpusError> {
    let freqs = symptom_frequencies(dataset)?;
    if k > freqs.len() {
        return Err(CorpusError::Range {
            k,
            distinct: freqs.len(),
        });
    }
    let selected: BTreeSet<&str> = match selector {
        SubsetSelector::TopK => freqs[..k].iter().map(|(t, _)| t.as_str()).collect(),
        SubsetSelector::BottomK => freqs[freqs.len() - k..]
            .iter()
            .map(|(t, _)| t.as_str())
            .collect(),
    };
    let suffix = match selector {
        SubsetSelector::TopK => format!("top-{k}"),
        SubsetSelector::BottomK => format!("bottom-{k}"),
    };
    let mut subset = Dataset::new(format!("{}-{suffix}", dataset.name));
    for report in &dataset.reports {
        let Some(gold) = dataset.gold.get(&report.id) else {
            continue;
        };
        let hit = gold
            .links
            .keys()
            .any(|t| selected.contains(normalize_term(t).as_str()));
        if hit {
            subset.reports.push(report.clone());
            subset.gold.insert(report.id.clone(), gold.clone());
        }
    }
    Ok(subset)
}

/// Histogram of gold-linked term counts: bucket = links per report,
/// value = number of reports. Reports without gold fall in bucket 0.
pub fn symptom_count_histogram(dataset: &Dataset) -> Result<BTreeMap<usize, usize>, CorpusError> {
    if dataset.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut histogram = BTreeMap::new();
    for report in &dataset.reports {
        let bucket = dataset
            .gold
            .get(&report.id)
            .map(|g| g.links.len())
            .unwrap_or(0);
        *histogram.entry(bucket).or_insert(0) += 1;
    }
    Ok(histogram)
}
