//! Raw VAERS ingestion: pair the narrative table with the coded-symptom table.

use super::{CorpusError, Dataset, Report, SuggestedTerm};
use crate::distill::normalize_term;
use std::collections::BTreeSet;
use std::path::Path;

const SYMPTOM_COLUMNS: [&str; 5] = ["SYMPTOM1", "SYMPTOM2", "SYMPTOM3", "SYMPTOM4", "SYMPTOM5"];

/// Build a dataset from the two raw distribution files: a data table with
/// `VAERS_ID` and `SYMPTOM_TEXT` columns and a symptoms table with
/// `VAERS_ID` plus `SYMPTOM1..SYMPTOM5` (multiple rows per id allowed).
/// The result carries no gold annotations.
pub fn ingest_vaers(
    data_table: impl AsRef<Path>,
    symptoms_table: impl AsRef<Path>,
    name: &str,
) -> Result<Dataset, CorpusError> {
    let data_path = data_table.as_ref();
    let symptoms_path = symptoms_table.as_ref();

    let mut data_reader = open_csv(data_path)?;
    let data_headers = headers_of(&mut data_reader, data_path)?;
    let id_col = require_column(&data_headers, "VAERS_ID", data_path)?;
    let text_col = require_column(&data_headers, "SYMPTOM_TEXT", data_path)?;

    let mut symptoms_reader = open_csv(symptoms_path)?;
    let symptom_headers = headers_of(&mut symptoms_reader, symptoms_path)?;
    let sym_id_col = require_column(&symptom_headers, "VAERS_ID", symptoms_path)?;
    let mut symptom_cols = Vec::with_capacity(SYMPTOM_COLUMNS.len());
    for col in SYMPTOM_COLUMNS {
        symptom_cols.push(require_column(&symptom_headers, col, symptoms_path)?);
    }

    // id -> suggested terms, first-occurrence order, deduplicated under
    // normalization across all rows for that id.
    let mut suggested: std::collections::BTreeMap<String, (Vec<SuggestedTerm>, BTreeSet<String>)> =
        std::collections::BTreeMap::new();
    for row in symptoms_reader.records() {
        let row = row.map_err(|e| csv_err(symptoms_path, e))?;
        let id = row.get(sym_id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            continue;
        }
        let entry = suggested.entry(id).or_default();
        for &col in &symptom_cols {
            let cell = row.get(col).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let norm = normalize_term(cell);
            if !norm.is_empty() && entry.1.insert(norm) {
                entry.0.push(SuggestedTerm::new(cell));
            }
        }
    }

    let mut dataset = Dataset::new(name);
    let mut seen_ids = BTreeSet::new();
    let mut dropped = 0usize;
    for row in data_reader.records() {
        let row = row.map_err(|e| csv_err(data_path, e))?;
        let id = row.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            continue;
        }
        if !seen_ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        let text = row.get(text_col).unwrap_or("").to_string();
        let terms = suggested.remove(&id).map(|(v, _)| v).unwrap_or_default();
        if text.trim().is_empty() || terms.is_empty() {
            dropped += 1;
            continue;
        }
        dataset.reports.push(Report {
            id,
            text,
            suggested: terms,
        });
    }
    if dropped > 0 {
        log::warn!("ingest: dropped {dropped} rows with empty text or no symptoms");
    }
    dataset.validate()?;
    Ok(dataset)
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, CorpusError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })
}

fn headers_of(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
) -> Result<Vec<String>, CorpusError> {
    Ok(reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

fn require_column(headers: &[String], column: &str, path: &Path) -> Result<usize, CorpusError> {
    headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CorpusError::Schema {
            table: path.display().to_string(),
            column: column.to_string(),
        })
}

fn csv_err(path: &Path, e: csv::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_pair(dir: &Path, data: &str, symptoms: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        fs::create_dir_all(dir).unwrap();
        let data_path = dir.join("data.csv");
        let symptoms_path = dir.join("symptoms.csv");
        fs::write(&data_path, data).unwrap();
        fs::write(&symptoms_path, symptoms).unwrap();
        (data_path, symptoms_path)
    }

    #[test]
    fn single_row_maps_columns() {
        let dir = std::env::temp_dir().join("sympcoder-ingest-single");
        let (d, s) = write_pair(
            &dir,
            "VAERS_ID,SYMPTOM_TEXT\n1,fever after shot\n",
            "VAERS_ID,SYMPTOM1,SYMPTOM2,SYMPTOM3,SYMPTOM4,SYMPTOM5\n1,Pyrexia,,,,\n",
        );
        let ds = ingest_vaers(&d, &s, "vaers").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.reports[0].text, "fever after shot");
        assert_eq!(ds.reports[0].suggested, vec![SuggestedTerm::new("Pyrexia")]);
        assert!(ds.gold.is_empty());
    }

    #[test]
    fn multiple_symptom_rows_union_deduplicated() {
        let dir = std::env::temp_dir().join("sympcoder-ingest-union");
        let (d, s) = write_pair(
            &dir,
            "VAERS_ID,SYMPTOM_TEXT\n1,fever and rash\n",
            "VAERS_ID,SYMPTOM1,SYMPTOM2,SYMPTOM3,SYMPTOM4,SYMPTOM5\n1,Pyrexia,,,,\n1,Pyrexia,Rash,,,\n",
        );
        let ds = ingest_vaers(&d, &s, "vaers").unwrap();
        let terms: Vec<&str> = ds.reports[0].suggested.iter().map(|s| s.term.as_str()).collect();
        assert_eq!(terms, vec!["Pyrexia", "Rash"]);
    }

    #[test]
    fn missing_text_column_is_schema_error() {
        let dir = std::env::temp_dir().join("sympcoder-ingest-schema");
        let (d, s) = write_pair(
            &dir,
            "VAERS_ID,OTHER\n1,x\n",
            "VAERS_ID,SYMPTOM1,SYMPTOM2,SYMPTOM3,SYMPTOM4,SYMPTOM5\n1,Pyrexia,,,,\n",
        );
        match ingest_vaers(&d, &s, "vaers").unwrap_err() {
            CorpusError::Schema { column, .. } => assert_eq!(column, "SYMPTOM_TEXT"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn duplicate_data_ids_rejected() {
        let dir = std::env::temp_dir().join("sympcoder-ingest-dup");
        let (d, s) = write_pair(
            &dir,
            "VAERS_ID,SYMPTOM_TEXT\n1,a\n1,b\n",
            "VAERS_ID,SYMPTOM1,SYMPTOM2,SYMPTOM3,SYMPTOM4,SYMPTOM5\n1,Pyrexia,,,,\n",
        );
        assert!(matches!(
            ingest_vaers(&d, &s, "vaers").unwrap_err(),
            CorpusError::DuplicateId(_)
        ));
    }

    #[test]
    fn quoted_embedded_commas_honored() {
        let dir = std::env::temp_dir().join("sympcoder-ingest-quotes");
        let (d, s) = write_pair(
            &dir,
            "VAERS_ID,SYMPTOM_TEXT\n1,\"fever, then rash\"\n",
            "VAERS_ID,SYMPTOM1,SYMPTOM2,SYMPTOM3,SYMPTOM4,SYMPTOM5\n1,Pyrexia,,,,\n",
        );
        let ds = ingest_vaers(&d, &s, "vaers").unwrap();
        assert_eq!(ds.reports[0].text, "fever, then rash");
    }
}
