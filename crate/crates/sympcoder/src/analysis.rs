//! Experiment views over evaluation records: corpus scores, common/rare
//! subset comparison, per-symptom mention-variant breakdowns, side-by-side
//! prediction exhibits, and table export.

use crate::corpus::Dataset;
use crate::distill::normalize_term;
use crate::metrics::{
    aggregate_match, fuzzy_ratio, link_scores, Alignments, LinkScores, MatchScores, MatchTriple,
    MetricsError, UnpairedPolicy,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("record parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no records found for report '{0}'")]
    NotFound(String),

    #[error("unknown term '{term}'{}", near_misses_suffix(.near))]
    UnknownTerm { term: String, near: Vec<String> },

    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn near_misses_suffix(near: &[String]) -> String {
    if near.is_empty() {
        String::new()
    } else {
        format!(" (near misses: {})", near.join(", "))
    }
}

/// Which coding strategy produced a record: integrated or sequential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStrategy {
    Taco,
    Tasi,
}

impl RunStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            RunStrategy::Taco => "taco",
            RunStrategy::Tasi => "tasi",
        }
    }
}

/// One scored mention pair, tagged with the gold term it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub term: String,
    pub pred: String,
    pub gold: String,
    pub bleu: f64,
    pub fuzzy: f64,
    pub cosine: f64,
}

impl MatchPair {
    pub fn triple(&self) -> MatchTriple {
        MatchTriple {
            bleu: self.bleu,
            fuzzy: self.fuzzy,
            cosine: self.cosine,
        }
    }
}

/// Mentions that found no counterpart during mention alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UnpairedCounts {
    pub predicted: usize,
    pub gold: usize,
}

/// Everything recorded for one (report, model, strategy) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub id: String,
    pub model: String,
    pub strategy: RunStrategy,
    /// Fingerprint of the completion this record was distilled from.
    pub raw_ref: String,
    pub links: BTreeMap<String, Vec<String>>,
    pub alignments: Alignments,
    pub match_pairs: Vec<MatchPair>,
    #[serde(default)]
    pub unpaired_mentions: UnpairedCounts,
    #[serde(default)]
    pub salvage_notes: Vec<String>,
    #[serde(default)]
    pub unlinkable_keys: Vec<String>,
}

/// Append one record as a JSON line.
pub fn append_record(writer: &mut impl Write, record: &EvaluationRecord) -> std::io::Result<()> {
    let line = serde_json::to_string(record)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    writeln!(writer, "{line}")
}

pub fn write_records(path: impl AsRef<Path>, records: &[EvaluationRecord]) -> Result<(), AnalysisError> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| AnalysisError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    for record in records {
        append_record(&mut file, record).map_err(io_err)?;
    }
    Ok(())
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<EvaluationRecord>, AnalysisError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| AnalysisError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| AnalysisError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Corpus LINK + MATCH scores for one record group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScores {
    pub model: String,
    pub strategy: RunStrategy,
    pub record_count: usize,
    pub link: LinkScores,
    pub match_scores: MatchScores,
}

/// Group records by (model, strategy) and score each group.
pub fn score_groups(
    records: &[EvaluationRecord],
    policy: UnpairedPolicy,
) -> Result<Vec<GroupScores>, AnalysisError> {
    let mut groups: BTreeMap<(String, RunStrategy), Vec<&EvaluationRecord>> = BTreeMap::new();
    for record in records {
        groups
            .entry((record.model.clone(), record.strategy))
            .or_default()
            .push(record);
    }
    let mut out = Vec::new();
    for ((model, strategy), members) in groups {
        out.push(GroupScores {
            model,
            strategy,
            record_count: members.len(),
            link: link_scores(members.iter().map(|r| &r.alignments))?,
            match_scores: match_scores_of(&members, policy),
        });
    }
    Ok(out)
}

fn match_scores_of(records: &[&EvaluationRecord], policy: UnpairedPolicy) -> MatchScores {
    let triples: Vec<MatchTriple> = records
        .iter()
        .flat_map(|r| r.match_pairs.iter().map(MatchPair::triple))
        .collect();
    let unpaired_p = records.iter().map(|r| r.unpaired_mentions.predicted).sum();
    let unpaired_g = records.iter().map(|r| r.unpaired_mentions.gold).sum();
    aggregate_match(&triples, unpaired_p, unpaired_g, policy)
}

/// One cell of the common/rare comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetGroup {
    pub subset: String,
    pub model: String,
    pub strategy: RunStrategy,
    /// No record of this group covered the subset.
    pub empty: bool,
    pub link: Option<LinkScores>,
    pub match_scores: Option<MatchScores>,
    pub record_count: usize,
}

/// Recompute group scores restricted to each subset's reports.
pub fn subset_compare(
    records: &[EvaluationRecord],
    subsets: &[(&str, &Dataset)],
    policy: UnpairedPolicy,
) -> Result<Vec<SubsetGroup>, AnalysisError> {
    let mut combos: BTreeSet<(String, RunStrategy)> = BTreeSet::new();
    for record in records {
        combos.insert((record.model.clone(), record.strategy));
    }
    let mut out = Vec::new();
    for (subset_name, dataset) in subsets {
        let ids: BTreeSet<&str> = dataset.reports.iter().map(|r| r.id.as_str()).collect();
        for (model, strategy) in &combos {
            let members: Vec<&EvaluationRecord> = records
                .iter()
                .filter(|r| {
                    r.model == *model && r.strategy == *strategy && ids.contains(r.id.as_str())
                })
                .collect();
            if members.is_empty() {
                out.push(SubsetGroup {
                    subset: subset_name.to_string(),
                    model: model.clone(),
                    strategy: *strategy,
                    empty: true,
                    link: None,
                    match_scores: None,
                    record_count: 0,
                });
                continue;
            }
            out.push(SubsetGroup {
                subset: subset_name.to_string(),
                model: model.clone(),
                strategy: *strategy,
                empty: false,
                link: Some(link_scores(members.iter().map(|r| &r.alignments))?),
                match_scores: Some(match_scores_of(&members, policy)),
                record_count: members.len(),
            });
        }
    }
    Ok(out)
}

/// Surface-form tally: normalized variant -> (display form, count). The
/// display form is the most frequent raw spelling.
pub type VariantCounts = Vec<(String, usize)>;

/// Mention-variant table for one standard term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymptomBreakdown {
    pub term: String,
    pub report_count: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub mean_cosine: Option<f64>,
    pub gold_variants: VariantCounts,
    pub model_variants: VariantCounts,
}

/// Tally gold and model mention variants for the selected terms, with
/// per-term EM-Fuzzy precision/recall over the supplied records.
pub fn symptom_breakdown(
    records: &[EvaluationRecord],
    dataset: &Dataset,
    terms: &[String],
) -> Result<Vec<SymptomBreakdown>, AnalysisError> {
    let known: BTreeSet<String> = dataset
        .gold
        .values()
        .flat_map(|g| g.links.keys())
        .map(|t| normalize_term(t))
        .collect();
    let mut out = Vec::new();
    for term in terms {
        let norm = normalize_term(term);
        if !known.contains(&norm) {
            let mut near: Vec<(f64, String)> = known
                .iter()
                .map(|t| (fuzzy_ratio(&norm, t), t.clone()))
                .filter(|(r, _)| *r >= 0.6)
                .collect();
            near.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
            return Err(AnalysisError::UnknownTerm {
                term: term.clone(),
                near: near.into_iter().take(3).map(|(_, t)| t).collect(),
            });
        }

        let report_count = dataset
            .gold
            .values()
            .filter(|g| g.links.keys().any(|t| normalize_term(t) == norm))
            .count();

        let mut gold_tally: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for gold in dataset.gold.values() {
            for (t, mentions) in &gold.links {
                if normalize_term(t) == norm {
                    for mention in mentions {
                        *gold_tally
                            .entry(normalize_term(mention))
                            .or_default()
                            .entry(mention.clone())
                            .or_insert(0) += 1;
                    }
                }
            }
        }

        let mut model_tally: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let mut predicted_n = 0u64;
        let mut matched_n = 0u64;
        let mut gold_n = 0u64;
        let mut cosine_sum = 0.0;
        let mut cosine_count = 0usize;
        for record in records {
            if record.links.contains_key(&norm) {
                predicted_n += 1;
                for mention in &record.links[&norm] {
                    *model_tally
                        .entry(normalize_term(mention))
                        .or_default()
                        .entry(mention.clone())
                        .or_insert(0) += 1;
                }
            }
            if record
                .alignments
                .em_fuzzy
                .pairs
                .iter()
                .any(|p| p.gold == norm)
            {
                matched_n += 1;
            }
            if dataset
                .gold_for(&record.id)
                .is_some_and(|g| g.links.keys().any(|t| normalize_term(t) == norm))
            {
                gold_n += 1;
            }
            for pair in &record.match_pairs {
                if pair.term == norm {
                    cosine_sum += pair.cosine;
                    cosine_count += 1;
                }
            }
        }

        out.push(SymptomBreakdown {
            term: term.clone(),
            report_count,
            precision: (predicted_n > 0).then(|| matched_n as f64 / predicted_n as f64),
            recall: (gold_n > 0).then(|| matched_n as f64 / gold_n as f64),
            mean_cosine: (cosine_count > 0).then(|| cosine_sum / cosine_count as f64),
            gold_variants: collapse_variants(gold_tally),
            model_variants: collapse_variants(model_tally),
        });
    }
    Ok(out)
}

/// Pick the most frequent raw surface per normalized variant, ordered by
/// descending count then surface form.
fn collapse_variants(tally: BTreeMap<String, BTreeMap<String, usize>>) -> VariantCounts {
    let mut out: Vec<(String, usize)> = tally
        .into_values()
        .map(|surfaces| {
            let total: usize = surfaces.values().sum();
            let display = surfaces
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|(s, _)| s)
                .unwrap_or_default();
            (display, total)
        })
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Per-term verdict in an exhibit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    Correct,
    Missing,
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhibitRow {
    pub term: String,
    pub status: LinkStatus,
    pub mentions: Vec<String>,
    /// Any aligned mention pair with fuzzy ratio below 1.
    pub mention_divergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExhibit {
    pub model: String,
    pub strategy: RunStrategy,
    pub rows: Vec<ExhibitRow>,
}

/// Side-by-side comparison of gold links and each model's links for one
/// report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhibitDoc {
    pub report_id: String,
    pub text: String,
    pub gold: Vec<(String, Vec<String>)>,
    pub models: Vec<ModelExhibit>,
}

pub fn exhibit(
    report_id: &str,
    records: &[EvaluationRecord],
    dataset: &Dataset,
) -> Result<ExhibitDoc, AnalysisError> {
    let members: Vec<&EvaluationRecord> =
        records.iter().filter(|r| r.id == report_id).collect();
    if members.is_empty() {
        return Err(AnalysisError::NotFound(report_id.to_string()));
    }
    let report = dataset
        .report(report_id)
        .ok_or_else(|| AnalysisError::NotFound(report_id.to_string()))?;
    let gold_links: Vec<(String, Vec<String>)> = dataset
        .gold_for(report_id)
        .map(|g| g.links.iter().map(|(t, m)| (t.clone(), m.clone())).collect())
        .unwrap_or_default();

    let mut models = Vec::new();
    for record in members {
        let mut rows = Vec::new();
        for (term, _) in &gold_links {
            let norm = normalize_term(term);
            let matched = record
                .alignments
                .em_fuzzy
                .pairs
                .iter()
                .find(|p| p.gold == norm);
            let row = match matched {
                Some(pair) => {
                    let divergence = record
                        .match_pairs
                        .iter()
                        .filter(|mp| mp.term == norm)
                        .any(|mp| mp.fuzzy < 1.0);
                    ExhibitRow {
                        term: term.clone(),
                        status: LinkStatus::Correct,
                        mentions: record.links.get(&pair.predicted).cloned().unwrap_or_default(),
                        mention_divergence: divergence,
                    }
                }
                None => ExhibitRow {
                    term: term.clone(),
                    status: LinkStatus::Missing,
                    mentions: Vec::new(),
                    mention_divergence: false,
                },
            };
            rows.push(row);
        }
        for spurious in &record.alignments.em_fuzzy.unmatched_predicted {
            rows.push(ExhibitRow {
                term: spurious.clone(),
                status: LinkStatus::Spurious,
                mentions: record.links.get(spurious).cloned().unwrap_or_default(),
                mention_divergence: false,
            });
        }
        models.push(ModelExhibit {
            model: record.model.clone(),
            strategy: record.strategy,
            rows,
        });
    }
    Ok(ExhibitDoc {
        report_id: report_id.to_string(),
        text: report.text.clone(),
        gold: gold_links,
        models,
    })
}

impl ExhibitDoc {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Report {}\n", self.report_id));
        out.push_str(&format!("Text: {}\n\n", self.text));
        out.push_str("Gold links:\n");
        for (term, mentions) in &self.gold {
            out.push_str(&format!("  {}: [{}]\n", term, mentions.join(", ")));
        }
        for model in &self.models {
            out.push_str(&format!(
                "\n{} ({})\n",
                model.model,
                model.strategy.label()
            ));
            for row in &model.rows {
                let mark = match row.status {
                    LinkStatus::Correct => "ok     ",
                    LinkStatus::Missing => "MISSING",
                    LinkStatus::Spurious => "SPURIOUS",
                };
                let divergence = if row.mention_divergence { " (mention divergence)" } else { "" };
                out.push_str(&format!(
                    "  [{mark}] {}: [{}]{divergence}\n",
                    row.term,
                    row.mentions.join(", ")
                ));
            }
        }
        out
    }
}

/// The exact LINK column names, in table order.
pub const LINK_CSV_HEADER: &str =
    "EM-Precision,EM-Recall,Fuzzy-Precision,Fuzzy-Recall,EM-Fuzzy-Precision,EM-Fuzzy-Recall";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn link_cells(link: &LinkScores) -> [Option<f64>; 6] {
    [
        link.em.precision(),
        link.em.recall(),
        link.fuzzy.precision(),
        link.fuzzy.recall(),
        link.em_fuzzy.precision(),
        link.em_fuzzy.recall(),
    ]
}

/// Render corpus LINK scores as a two-line delimited table with exactly the
/// six metric columns.
pub fn export_link_csv(link: &LinkScores) -> String {
    let cells: Vec<String> = link_cells(link).iter().map(|v| fmt_opt(*v)).collect();
    format!("{LINK_CSV_HEADER}\n{}\n", cells.join(","))
}

/// Render grouped scores as a delimited table with identifying columns.
pub fn export_groups_csv(groups: &[GroupScores]) -> String {
    let mut out = format!("Model,Strategy,{LINK_CSV_HEADER},BLEU,Fuzzy,Cosine\n");
    for group in groups {
        let link: Vec<String> = link_cells(&group.link).iter().map(|v| fmt_opt(*v)).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            group.model,
            group.strategy.label(),
            link.join(","),
            fmt_opt(group.match_scores.bleu),
            fmt_opt(group.match_scores.fuzzy),
            fmt_opt(group.match_scores.cosine),
        ));
    }
    out
}

/// Render grouped scores as fixed-width text tables.
pub fn export_groups_text(groups: &[GroupScores]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} | {:>7} {:>7} {:>7}\n",
        "Model", "Strategy", "EM-P", "EM-R", "Fz-P", "Fz-R", "EMFz-P", "EMFz-R", "BLEU", "Fuzzy",
        "Cosine"
    ));
    for group in groups {
        let cells = link_cells(&group.link);
        out.push_str(&format!(
            "{:<16} {:<12}",
            group.model,
            group.strategy.label()
        ));
        for cell in cells {
            out.push_str(&format!(" {:>8}", fmt_opt(cell)));
        }
        out.push_str(&format!(
            " | {:>7} {:>7} {:>7}\n",
            fmt_opt(group.match_scores.bleu),
            fmt_opt(group.match_scores.fuzzy),
            fmt_opt(group.match_scores.cosine),
        ));
    }
    out
}

/// Machine-readable export; `import_groups_json` restores equal values.
pub fn export_groups_json(groups: &[GroupScores]) -> String {
    serde_json::to_string_pretty(groups).expect("group serialization cannot fail")
}

pub fn import_groups_json(body: &str) -> Result<Vec<GroupScores>, AnalysisError> {
    serde_json::from_str(body).map_err(|e| AnalysisError::Parse {
        line: 0,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{GoldAnnotation, Report, SuggestedTerm};
    use crate::metrics::Alignments;

    fn dataset() -> Dataset {
        let mut ds = Dataset::new("fixture");
        ds.reports.push(Report {
            id: "r1".into(),
            text: "fever and rash".into(),
            suggested: vec![
                SuggestedTerm::new("Pyrexia"),
                SuggestedTerm::new("Rash"),
                SuggestedTerm::new("Nausea"),
            ],
        });
        let mut links = BTreeMap::new();
        links.insert("Pyrexia".into(), vec!["fever".into()]);
        links.insert("Rash".into(), vec!["rash".into()]);
        ds.gold.insert(
            "r1".into(),
            GoldAnnotation {
                report_id: "r1".into(),
                links,
            },
        );
        ds
    }

    fn record(links: &[(&str, &[&str])], gold: &[&str]) -> EvaluationRecord {
        let link_map: BTreeMap<String, Vec<String>> = links
            .iter()
            .map(|(t, m)| (t.to_string(), m.iter().map(|s| s.to_string()).collect()))
            .collect();
        let predicted: Vec<String> = link_map.keys().cloned().collect();
        let gold: Vec<String> = gold.iter().map(|s| s.to_string()).collect();
        EvaluationRecord {
            id: "r1".into(),
            model: "mock".into(),
            strategy: RunStrategy::Taco,
            raw_ref: "f".into(),
            links: link_map,
            alignments: Alignments::compute(&predicted, &gold, 0.8),
            match_pairs: vec![],
            unpaired_mentions: UnpairedCounts::default(),
            salvage_notes: vec![],
            unlinkable_keys: vec![],
        }
    }

    #[test]
    fn records_round_trip_through_file() {
        let dir = std::env::temp_dir().join("sympcoder-analysis-records");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("records.jsonl");
        let records = vec![record(&[("pyrexia", &["fever"])], &["Pyrexia", "Rash"])];
        write_records(&path, &records).unwrap();
        let loaded = load_records(&path).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn exhibit_marks_correct_missing_and_spurious() {
        let ds = dataset();
        let records = vec![record(
            &[("pyrexia", &["fever"]), ("nausea", &["queasy"])],
            &["Pyrexia", "Rash"],
        )];
        let doc = exhibit("r1", &records, &ds).unwrap();
        let rows = &doc.models[0].rows;
        assert_eq!(rows.len(), 3);
        let by_term: BTreeMap<&str, LinkStatus> =
            rows.iter().map(|r| (r.term.as_str(), r.status)).collect();
        assert_eq!(by_term["Pyrexia"], LinkStatus::Correct);
        assert_eq!(by_term["Rash"], LinkStatus::Missing);
        assert_eq!(by_term["nausea"], LinkStatus::Spurious);
        // every gold term appears exactly once
        let gold_rows = rows
            .iter()
            .filter(|r| r.status != LinkStatus::Spurious)
            .count();
        assert_eq!(gold_rows, doc.gold.len());
    }

    #[test]
    fn exhibit_unknown_report_errors() {
        let ds = dataset();
        assert!(matches!(
            exhibit("zz", &[], &ds).unwrap_err(),
            AnalysisError::NotFound(_)
        ));
    }

    #[test]
    fn breakdown_counts_variants() {
        let ds = dataset();
        let records = vec![record(&[("pyrexia", &["fever"])], &["Pyrexia", "Rash"])];
        let breakdown =
            symptom_breakdown(&records, &ds, &["Pyrexia".to_string()]).unwrap();
        assert_eq!(breakdown.len(), 1);
        assert_eq!(breakdown[0].report_count, 1);
        assert_eq!(breakdown[0].gold_variants, vec![("fever".to_string(), 1)]);
        assert_eq!(breakdown[0].model_variants, vec![("fever".to_string(), 1)]);
        assert_eq!(breakdown[0].precision, Some(1.0));
        assert_eq!(breakdown[0].recall, Some(1.0));
    }

    #[test]
    fn breakdown_unknown_term_lists_near_misses() {
        let ds = dataset();
        match symptom_breakdown(&[], &ds, &["Pyrexias".to_string()]).unwrap_err() {
            AnalysisError::UnknownTerm { near, .. } => {
                assert_eq!(near, vec!["pyrexia".to_string()]);
            }
            other => panic!("expected unknown-term error, got {other}"),
        }
    }

    #[test]
    fn link_csv_header_is_pinned() {
        let scores = LinkScores::default();
        let csv = export_link_csv(&scores);
        assert!(csv.starts_with(
            "EM-Precision,EM-Recall,Fuzzy-Precision,Fuzzy-Recall,EM-Fuzzy-Precision,EM-Fuzzy-Recall\n"
        ));
    }

    #[test]
    fn groups_json_round_trips() {
        let records = vec![record(&[("pyrexia", &["fever"])], &["Pyrexia"])];
        let groups = score_groups(&records, UnpairedPolicy::Exclude).unwrap();
        let body = export_groups_json(&groups);
        let back = import_groups_json(&body).unwrap();
        assert_eq!(groups, back);
    }

    #[test]
    fn subset_compare_flags_uncovered_groups() {
        let ds = dataset();
        let mut other = Dataset::new("other");
        other.reports.push(Report {
            id: "zz".into(),
            text: "t".into(),
            suggested: vec![SuggestedTerm::new("X")],
        });
        let records = vec![record(&[("pyrexia", &["fever"])], &["Pyrexia"])];
        let groups = subset_compare(
            &records,
            &[("common", &ds), ("rare", &other)],
            UnpairedPolicy::Exclude,
        )
        .unwrap();
        assert_eq!(groups.len(), 2);
        assert!(!groups[0].empty);
        assert!(groups[1].empty);
    }
}
