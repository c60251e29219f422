//! Gold-derived oracle backend for desk-scale verification.
//!
//! Renders well-formed completions straight from the gold annotations, with
//! controllable noise. Zero noise reproduces gold exactly, so the full
//! pipeline must score 1.0 everywhere; the noise knobs force exact,
//! predictable metric arithmetic.

use super::{BackendError, ChatBackend, CompletionText, InferenceParams, RawCompletion};
use crate::corpus::{Dataset, GoldAnnotation, Report};
use crate::distill::normalize_term;
use crate::prompting::{Prompt, Strategy};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Controlled corruption of the gold-derived output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// Remove this many linked terms, lowest mention count first.
    #[serde(default)]
    pub drop_terms: usize,
    /// Add this many suggested-but-unlinked terms with fabricated mentions.
    #[serde(default)]
    pub add_spurious: usize,
    /// Apply a single-character edit to this fraction of mentions.
    #[serde(default)]
    pub perturb_mentions: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self {
            drop_terms: 0,
            add_spurious: 0,
            perturb_mentions: 0.0,
            seed: 0,
        }
    }
}

impl NoiseProfile {
    pub fn is_zero(&self) -> bool {
        self.drop_terms == 0 && self.add_spurious == 0 && self.perturb_mentions == 0.0
    }
}

/// The noise-adjusted term-to-mentions mapping for one report.
fn noisy_links(
    report: &Report,
    gold: &GoldAnnotation,
    noise: &NoiseProfile,
) -> Result<Vec<(String, Vec<String>)>, BackendError> {
    let mut links: Vec<(String, Vec<String>)> = gold
        .links
        .iter()
        .map(|(t, m)| (t.clone(), m.clone()))
        .collect();

    if noise.drop_terms > links.len() {
        return Err(BackendError::NoiseRange(format!(
            "drop_terms = {} but only {} terms are linked for report {}",
            noise.drop_terms,
            links.len(),
            report.id
        )));
    }
    if noise.drop_terms > 0 {
        // lowest-frequency first: fewest mentions, ties by normalized term
        let mut ranked: Vec<(usize, String)> = links
            .iter()
            .map(|(t, m)| (m.len(), normalize_term(t)))
            .collect();
        ranked.sort();
        let victims: BTreeSet<String> = ranked
            .into_iter()
            .take(noise.drop_terms)
            .map(|(_, t)| t)
            .collect();
        links.retain(|(t, _)| !victims.contains(&normalize_term(t)));
    }

    if noise.add_spurious > 0 {
        let linked: BTreeSet<String> = gold.links.keys().map(|t| normalize_term(t)).collect();
        let unlinked: Vec<&str> = report
            .suggested
            .iter()
            .map(|s| s.term.as_str())
            .filter(|t| !linked.contains(&normalize_term(t)))
            .collect();
        if noise.add_spurious > unlinked.len() {
            return Err(BackendError::NoiseRange(format!(
                "add_spurious = {} but only {} suggested terms are unlinked for report {}",
                noise.add_spurious,
                unlinked.len(),
                report.id
            )));
        }
        for term in unlinked.into_iter().take(noise.add_spurious) {
            links.push((
                term.to_string(),
                vec![format!("reported {}", term.to_lowercase())],
            ));
        }
    }

    if noise.perturb_mentions > 0.0 {
        let total: usize = links.iter().map(|(_, m)| m.len()).sum();
        let victims = ((noise.perturb_mentions * total as f64) + 0.5).floor() as usize;
        let mut slots: Vec<(usize, usize)> = links
            .iter()
            .enumerate()
            .flat_map(|(i, (_, m))| (0..m.len()).map(move |j| (i, j)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        slots.shuffle(&mut rng);
        for (i, j) in slots.into_iter().take(victims.min(total)) {
            let mention = &mut links[i].1[j];
            *mention = single_char_edit(mention);
        }
    }

    Ok(links)
}

/// Substitute one character near the middle of the string.
fn single_char_edit(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return "x".into();
    }
    let mid = chars.len() / 2;
    let replacement = if chars[mid] == 'x' { 'z' } else { 'x' };
    chars
        .iter()
        .enumerate()
        .map(|(i, &c)| if i == mid { replacement } else { c })
        .collect()
}

/// Render a syntactically well-formed completion embedding the gold-derived
/// mapping, after applying the noise profile.
pub fn oracle_complete(
    report: &Report,
    gold: &GoldAnnotation,
    noise: &NoiseProfile,
) -> Result<RawCompletion, BackendError> {
    let links = noisy_links(report, gold, noise)?;
    let text = render_mapping(&links);
    let mut hasher = Sha256::new();
    hasher.update(b"oracle");
    hasher.update(report.id.as_bytes());
    hasher.update(text.as_bytes());
    let fingerprint: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(RawCompletion {
        text,
        model: "oracle".into(),
        prompt_fingerprint: fingerprint,
        retrieved_from_cache: false,
        truncated: false,
    })
}

fn render_mapping(links: &[(String, Vec<String>)]) -> String {
    let map: serde_json::Map<String, serde_json::Value> = links
        .iter()
        .map(|(t, m)| {
            (
                t.clone(),
                serde_json::Value::Array(
                    m.iter()
                        .map(|s| serde_json::Value::String(s.clone()))
                        .collect(),
                ),
            )
        })
        .collect();
    serde_json::Value::Object(map).to_string()
}

/// A [`ChatBackend`] answering from gold annotations, routed by the
/// prompt's report id and strategy: mapping output for integrated and
/// linking phases, a flat mention list for the extraction phase.
pub struct OracleBackend {
    dataset: Dataset,
    noise: NoiseProfile,
    calls: AtomicUsize,
}

impl OracleBackend {
    pub fn new(dataset: Dataset, noise: NoiseProfile) -> Self {
        Self {
            dataset,
            noise,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for OracleBackend {
    fn complete_text(
        &self,
        prompt: &Prompt,
        _params: &InferenceParams,
    ) -> Result<CompletionText, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let report = self.dataset.report(&prompt.report_id).ok_or_else(|| {
            BackendError::BadResponse(format!("unknown report {}", prompt.report_id))
        })?;
        let gold = self.dataset.gold_for(&prompt.report_id).ok_or_else(|| {
            BackendError::BadResponse(format!("no gold annotation for report {}", prompt.report_id))
        })?;
        let links = noisy_links(report, gold, &self.noise)?;
        let text = match prompt.strategy {
            Strategy::Taco | Strategy::TasiPhase2 => render_mapping(&links),
            Strategy::TasiPhase1 => {
                let mentions: Vec<serde_json::Value> = links
                    .iter()
                    .flat_map(|(_, m)| m.iter())
                    .map(|m| serde_json::Value::String(m.clone()))
                    .collect();
                serde_json::Value::Array(mentions).to_string()
            }
        };
        Ok(CompletionText {
            text,
            truncated: false,
            raw_body: None,
        })
    }

    fn name(&self) -> &str {
        "oracle"
    }
}
