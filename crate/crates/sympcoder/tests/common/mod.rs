//! Shared fixtures for integration tests.
#![allow(dead_code)] // each test target compiles its own subset of helpers

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use sympcoder::config::RunConfig;
use sympcoder::corpus::{Dataset, GoldAnnotation, Report, SuggestedTerm};

/// Unique temp directory per test invocation.
pub fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "sympcoder-it-{tag}-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

const TERM_POOL: [&str; 12] = [
    "Pyrexia",
    "Rash",
    "Headache",
    "Nausea",
    "Fatigue",
    "Dizziness",
    "Chills",
    "Myalgia",
    "Vomiting",
    "Pruritus",
    "Cough",
    "Insomnia",
];

/// Build a dataset where every report links exactly `linked` gold terms
/// (one mention each) and carries `spare` additional unlinked suggested
/// terms, so oracle noise arithmetic is exact.
pub fn uniform_dataset(reports: usize, linked: usize, spare: usize) -> Dataset {
    assert!(linked + spare <= TERM_POOL.len());
    let mut dataset = Dataset::new(format!("uniform-{linked}-{spare}"));
    for i in 0..reports {
        let id = format!("R{i:03}");
        // rotate the pool so term frequencies differ across the corpus
        let offset = i % TERM_POOL.len();
        let terms: Vec<&str> = (0..linked + spare)
            .map(|k| TERM_POOL[(offset + k) % TERM_POOL.len()])
            .collect();
        let mentions: Vec<String> = terms[..linked]
            .iter()
            .map(|t| format!("{} mention", t.to_lowercase()))
            .collect();
        let text = format!(
            "Patient {i} reported {} following vaccination.",
            mentions.join(", ")
        );
        let mut links = BTreeMap::new();
        for (term, mention) in terms[..linked].iter().zip(&mentions) {
            links.insert(term.to_string(), vec![mention.clone()]);
        }
        dataset.reports.push(Report {
            id: id.clone(),
            text,
            suggested: terms.iter().map(|t| SuggestedTerm::new(*t)).collect(),
        });
        dataset.gold.insert(
            id.clone(),
            GoldAnnotation {
                report_id: id,
                links,
            },
        );
    }
    dataset.validate().expect("fixture dataset is valid");
    dataset
}

/// Save a dataset into `dir` and return an offline-oracle run config
/// rooted there.
pub fn offline_config(dataset: &Dataset, dir: &Path) -> RunConfig {
    let dataset_path = dir.join("dataset.jsonl");
    sympcoder::corpus::save_dataset(dataset, &dataset_path).unwrap();
    let mut config = RunConfig::offline_defaults(&dataset_path);
    config.cache_dir = dir.join("cache");
    config.output_dir = dir.join("out");
    config
}
