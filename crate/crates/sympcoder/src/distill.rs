//! Distillation of raw model output into validated structures.
//!
//! Model responses arrive with preamble prose, markdown fences, truncation,
//! or outright nonsense. A fixed ladder of recovery strategies is applied in
//! order until one yields a parseable mapping; every applied strategy is
//! recorded in `salvage_notes` so recovery stays auditable.

use crate::corpus::Report;
use crate::metrics::fuzzy_ratio;
use serde_json::Value;
use std::collections::BTreeMap;
use std::sync::LazyLock;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Fuzzy threshold for matching an output key to a suggested term. Stricter
/// than the LINK threshold because a mis-keyed link silently corrupts
/// scoring.
pub const KEY_FUZZY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistillError {
    #[error("no strategy recovered a structured mapping from the model output")]
    MalformedOutput,
}

/// Canonical term form: NFC, lowercased, trimmed, internal whitespace runs
/// collapsed, leading/trailing punctuation stripped.
pub fn normalize_term(s: &str) -> String {
    let composed: String = s.nfc().collect();
    let lowered = composed.to_lowercase();
    let stripped = lowered
        .trim_matches(|c: char| c.is_whitespace() || ".,:;\"'()[]".contains(c));
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_non_prediction(s: &str) -> bool {
    matches!(normalize_term(s).as_str(), "" | "none" | "n/a")
}

/// A model's coded links for one report, after distillation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodedOutput {
    pub report_id: String,
    /// Normalized suggested term -> mention strings.
    pub links: BTreeMap<String, Vec<String>>,
    /// Output keys that matched no suggested term.
    pub unlinkable_keys: Vec<String>,
    /// Recovery strategies applied, in order.
    pub salvage_notes: Vec<String>,
}

impl CodedOutput {
    pub fn empty(report_id: impl Into<String>) -> Self {
        Self {
            report_id: report_id.into(),
            ..Default::default()
        }
    }
}

/// Flat mention list recovered from a sequential extraction phase.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractionList {
    pub report_id: String,
    /// Deduplicated under normalization, first-occurrence order.
    pub mentions: Vec<String>,
    pub salvage_notes: Vec<String>,
}

/// Recover a term-to-mentions mapping from raw model output. Keys are
/// matched to the report's suggested terms by normalization, with one fuzzy
/// fallback pass; keys whose values signal non-prediction ("none", "n/a",
/// empty) are dropped.
pub fn distill(raw_text: &str, report_id: &str, report: &Report) -> Result<CodedOutput, DistillError> {
    let mut notes = Vec::new();
    let object = recover_object(raw_text, &mut notes).ok_or(DistillError::MalformedOutput)?;

    // Suggested universe: normalized form -> canonical normalized term.
    let universe: Vec<String> = {
        let mut seen = std::collections::BTreeSet::new();
        report
            .suggested
            .iter()
            .map(|s| normalize_term(&s.term))
            .filter(|t| !t.is_empty() && seen.insert(t.clone()))
            .collect()
    };

    let mut links: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut unlinkable = Vec::new();
    for (key, value) in object {
        let mentions = mention_values(&value);
        if mentions.is_empty() {
            continue; // non-prediction: key dropped
        }
        let norm_key = normalize_term(&key);
        let resolved = if universe.iter().any(|t| *t == norm_key) {
            Some(norm_key.clone())
        } else {
            let best = universe
                .iter()
                .map(|t| (fuzzy_ratio(&norm_key, t), t))
                .filter(|(r, _)| *r >= KEY_FUZZY_THRESHOLD)
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| b.1.cmp(a.1)));
            if let Some((_, term)) = best {
                notes.push(format!("fuzzy_key:{}->{}", key.trim(), term));
                Some(term.clone())
            } else {
                None
            }
        };
        match resolved {
            Some(term) => {
                let list = links.entry(term).or_default();
                for m in mentions {
                    if !list.iter().any(|p| normalize_term(p) == normalize_term(&m)) {
                        list.push(m);
                    }
                }
            }
            None => unlinkable.push(key.trim().to_string()),
        }
    }
    links.retain(|_, v| !v.is_empty());

    Ok(CodedOutput {
        report_id: report_id.to_string(),
        links,
        unlinkable_keys: unlinkable,
        salvage_notes: notes,
    })
}

/// Recover a flat mention list from raw phase-one output, using the same
/// ladder adapted to list shapes.
pub fn distill_extraction(raw_text: &str, report_id: &str) -> Result<ExtractionList, DistillError> {
    let mut notes = Vec::new();
    let items = recover_list(raw_text, &mut notes).ok_or(DistillError::MalformedOutput)?;
    let mut mentions = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for item in items {
        if is_non_prediction(&item) {
            continue;
        }
        let norm = normalize_term(&item);
        if seen.insert(norm) {
            mentions.push(item.trim().to_string());
        }
    }
    Ok(ExtractionList {
        report_id: report_id.to_string(),
        mentions,
        salvage_notes: notes,
    })
}

/// Mention strings carried by one mapping value, with non-predictions
/// filtered out. An empty result signals the key should be dropped.
fn mention_values(value: &Value) -> Vec<String> {
    let raw: Vec<String> = match value {
        Value::Array(items) => items.iter().filter_map(scalar_string).collect(),
        Value::Null => Vec::new(),
        other => scalar_string(other).into_iter().collect(),
    };
    raw.into_iter()
        .map(|m| m.trim().to_string())
        .filter(|m| !is_non_prediction(m))
        .collect()
}

fn scalar_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Strategy ladder for object shapes
// ---------------------------------------------------------------------------

fn recover_object(raw: &str, notes: &mut Vec<String>) -> Option<Vec<(String, Value)>> {
    // 1. fenced code block containing an object
    for block in fenced_blocks(raw) {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(block.trim()) {
            notes.push("fenced_json".into());
            return Some(map.into_iter().collect());
        }
    }
    // 2. first balanced-brace object, with closure repair on truncation
    if let Some((text, repaired)) = balanced_span(raw, '{') {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&text) {
            notes.push("balanced_object".into());
            if repaired {
                notes.push("closure_repair".into());
            }
            return Some(map.into_iter().collect());
        }
    }
    // 3. key-value pattern harvest: `Term: [m1, m2]` lines
    let harvested = harvest_kv_lines(raw);
    if !harvested.is_empty() {
        notes.push("kv_harvest".into());
        return Some(harvested);
    }
    None
}

fn recover_list(raw: &str, notes: &mut Vec<String>) -> Option<Vec<String>> {
    // 1. fenced code block containing an array (or an object wrapping one)
    for block in fenced_blocks(raw) {
        match serde_json::from_str::<Value>(block.trim()) {
            Ok(Value::Array(items)) => {
                notes.push("fenced_json".into());
                return Some(items.iter().filter_map(scalar_string).collect());
            }
            Ok(Value::Object(map)) => {
                if let Some(items) = single_array_value(&map) {
                    notes.push("fenced_json".into());
                    notes.push("object_unwrap".into());
                    return Some(items);
                }
            }
            _ => {}
        }
    }
    // 2. first balanced-bracket array in the text
    if let Some((text, repaired)) = balanced_span(raw, '[') {
        if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(&text) {
            notes.push("balanced_array".into());
            if repaired {
                notes.push("closure_repair".into());
            }
            return Some(items.iter().filter_map(scalar_string).collect());
        }
    }
    // 2b. a bare object whose single value is an array of mentions
    if let Some((text, repaired)) = balanced_span(raw, '{') {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&text) {
            if let Some(items) = single_array_value(&map) {
                notes.push("balanced_object".into());
                if repaired {
                    notes.push("closure_repair".into());
                }
                notes.push("object_unwrap".into());
                return Some(items);
            }
        }
    }
    // 3. bullet / numbered line harvest
    let bullets = harvest_bullet_lines(raw);
    if !bullets.is_empty() {
        notes.push("bullet_harvest".into());
        return Some(bullets);
    }
    None
}

fn single_array_value(map: &serde_json::Map<String, Value>) -> Option<Vec<String>> {
    if map.len() != 1 {
        return None;
    }
    match map.values().next() {
        Some(Value::Array(items)) => Some(items.iter().filter_map(scalar_string).collect()),
        _ => None,
    }
}

/// Contents of markdown code fences, in order of appearance.
fn fenced_blocks(raw: &str) -> Vec<&str> {
    static FENCE: LazyLock<regex::Regex> = LazyLock::new(|| {
        regex::Regex::new(r"(?s)```[a-zA-Z]*\r?\n?(.*?)```").expect("static regex")
    });
    FENCE
        .captures_iter(raw)
        .map(|c| c.get(1).expect("capture group").as_str())
        .collect()
}

/// The first balanced span opened by `open`, skipping string literals. If
/// the text ends before the span closes (truncated output), attempts
/// closure completion: cut back to the last completed element and append
/// the missing closers. Returns the candidate span text and whether repair
/// was applied.
fn balanced_span(raw: &str, open: char) -> Option<(String, bool)> {
    #[derive(Clone, Copy, PartialEq)]
    enum Scope {
        Arr,
        // true once a ':' moved the cursor into value position
        Obj(bool),
    }
    let start = find_span_start(raw, open)?;
    let s = &raw[start..];
    let mut stack: Vec<Scope> = Vec::new();
    let mut in_str = false;
    let mut esc = false;
    // Last byte offset (exclusive) at which the partial span ends on a
    // completed value, plus the open scopes at that point.
    let mut safe_end: Option<(usize, Vec<Scope>)> = None;
    for (i, ch) in s.char_indices() {
        let end = i + ch.len_utf8();
        if in_str {
            if esc {
                esc = false;
            } else if ch == '\\' {
                esc = true;
            } else if ch == '"' {
                in_str = false;
                // a closed string completes a value unless it was a key
                let is_value = match stack.last() {
                    Some(Scope::Arr) | None => true,
                    Some(Scope::Obj(in_value)) => *in_value,
                };
                if is_value {
                    safe_end = Some((end, stack.clone()));
                }
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '{' => stack.push(Scope::Obj(false)),
            '[' => stack.push(Scope::Arr),
            ':' => {
                if let Some(Scope::Obj(in_value)) = stack.last_mut() {
                    *in_value = true;
                }
            }
            ',' => {
                if let Some(Scope::Obj(in_value)) = stack.last_mut() {
                    *in_value = false;
                }
            }
            '}' | ']' => {
                let expected = if ch == '}' { Scope::Obj(false) } else { Scope::Arr };
                match (stack.pop(), expected) {
                    (Some(Scope::Obj(_)), Scope::Obj(_)) | (Some(Scope::Arr), Scope::Arr) => {}
                    _ => return None,
                }
                if stack.is_empty() {
                    return Some((s[..end].to_string(), false));
                }
                safe_end = Some((end, stack.clone()));
            }
            _ => {}
        }
    }
    // Truncated: close the remaining open scopes from the last safe point.
    let (cut, open_stack) = safe_end?;
    let mut repaired = s[..cut].trim_end().trim_end_matches(',').to_string();
    for scope in open_stack.iter().rev() {
        repaired.push(match scope {
            Scope::Obj(_) => '}',
            Scope::Arr => ']',
        });
    }
    Some((repaired, true))
}

/// First occurrence of `open` that is not inside a string literal.
fn find_span_start(raw: &str, open: char) -> Option<usize> {
    let mut in_str = false;
    let mut esc = false;
    for (i, ch) in raw.char_indices() {
        if in_str {
            if esc {
                esc = false;
            } else if ch == '\\' {
                esc = true;
            } else if ch == '"' {
                in_str = false;
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            c if c == open => return Some(i),
            _ => {}
        }
    }
    None
}

/// Harvest `Term: [m1, m2]` lines.
fn harvest_kv_lines(raw: &str) -> Vec<(String, Value)> {
    static KV: LazyLock<regex::Regex> = LazyLock::new(|| {
        regex::Regex::new(r#"(?m)^\s*["']?([^:\[\]{}"']+?)["']?\s*:\s*\[([^\]]*)\]\s*,?\s*$"#)
            .expect("static regex")
    });
    KV.captures_iter(raw)
        .map(|c| {
            let key = c.get(1).expect("key group").as_str().trim().to_string();
            let items: Vec<Value> = c
                .get(2)
                .expect("value group")
                .as_str()
                .split(',')
                .map(|v| v.trim().trim_matches(|c| c == '"' || c == '\''))
                .filter(|v| !v.is_empty())
                .map(|v| Value::String(v.to_string()))
                .collect();
            (key, Value::Array(items))
        })
        .collect()
}

/// Harvest `- item`, `* item`, or `1. item` lines.
fn harvest_bullet_lines(raw: &str) -> Vec<String> {
    static BULLET: LazyLock<regex::Regex> = LazyLock::new(|| {
        regex::Regex::new(r"(?m)^\s*(?:[-*\u{2022}]|\d+[.)])\s+(.+?)\s*$").expect("static regex")
    });
    BULLET
        .captures_iter(raw)
        .map(|c| {
            c.get(1)
                .expect("item group")
                .as_str()
                .trim_matches(|c: char| c == '"' || c == '\'' || c == ',')
                .to_string()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SuggestedTerm;

    fn report(terms: &[&str]) -> Report {
        Report {
            id: "r1".into(),
            text: "clinical text".into(),
            suggested: terms.iter().map(|t| SuggestedTerm::new(*t)).collect(),
        }
    }

    #[test]
    fn normalize_strips_and_collapses() {
        assert_eq!(normalize_term("  Pyrexia. "), "pyrexia");
        assert_eq!(normalize_term("injection   site Erythema"), "injection site erythema");
        assert_eq!(normalize_term(""), "");
        assert_eq!(normalize_term("\"Rash,\""), "rash");
    }

    #[test]
    fn normalize_is_idempotent() {
        for s in ["  Pyrexia. ", "A  B", "(x)", "", "é\u{301}"] {
            let once = normalize_term(s);
            assert_eq!(normalize_term(&once), once);
        }
    }

    #[test]
    fn fenced_block_wins() {
        let raw = "Here are the results:\n```\n{\"Pyrexia\": [\"fever\"]}\n```";
        let out = distill(raw, "r1", &report(&["Pyrexia", "Rash"])).unwrap();
        assert_eq!(out.links["pyrexia"], vec!["fever"]);
        assert_eq!(out.salvage_notes, vec!["fenced_json"]);
    }

    #[test]
    fn none_valued_key_dropped() {
        let raw = r#"{"Rash macular": ["none"]}"#;
        let out = distill(raw, "r1", &report(&["Rash macular"])).unwrap();
        assert!(out.links.is_empty());
        assert!(out.unlinkable_keys.is_empty());
    }

    #[test]
    fn prose_only_is_malformed() {
        let err = distill("I cannot assist with that.", "r1", &report(&["Pyrexia"])).unwrap_err();
        assert_eq!(err, DistillError::MalformedOutput);
    }

    #[test]
    fn truncated_object_repaired() {
        let raw = r#"{"Pyrexia": ["fever", "temp of 103"], "Rash": ["blotchy"#;
        let out = distill(raw, "r1", &report(&["Pyrexia", "Rash"])).unwrap();
        assert_eq!(out.links["pyrexia"], vec!["fever", "temp of 103"]);
        assert!(out.salvage_notes.contains(&"closure_repair".to_string()));
    }

    #[test]
    fn fuzzy_key_fallback_is_strict() {
        let raw = r#"{"injection site erythaema": ["redness"]}"#;
        let out = distill(raw, "r1", &report(&["Injection site erythema"])).unwrap();
        assert_eq!(out.links["injection site erythema"], vec!["redness"]);
        assert_eq!(
            out.salvage_notes,
            vec!["balanced_object", "fuzzy_key:injection site erythaema->injection site erythema"]
        );
        // far-off keys stay unlinkable
        let raw = r#"{"Headache": ["pain"]}"#;
        let out = distill(raw, "r1", &report(&["Pyrexia"])).unwrap();
        assert!(out.links.is_empty());
        assert_eq!(out.unlinkable_keys, vec!["Headache"]);
    }

    #[test]
    fn extraction_list_parses_and_dedups() {
        let out = distill_extraction(r#"["fever", "rash"]"#, "r1").unwrap();
        assert_eq!(out.mentions, vec!["fever", "rash"]);
        let out = distill_extraction(r#"["fever", "Fever"]"#, "r1").unwrap();
        assert_eq!(out.mentions, vec!["fever"]);
        assert!(distill_extraction("no list here", "r1").is_err());
    }

    #[test]
    fn extraction_recovers_wrapped_lists() {
        // a bare object is salvaged through its inner array
        let out = distill_extraction(r#"{"symptoms": ["fever", "rash"]}"#, "r1").unwrap();
        assert_eq!(out.mentions, vec!["fever", "rash"]);
        assert_eq!(out.salvage_notes, vec!["balanced_array"]);
        // a fenced object unwraps its single list value
        let out =
            distill_extraction("```json\n{\"symptoms\": [\"fever\"]}\n```", "r1").unwrap();
        assert_eq!(out.mentions, vec!["fever"]);
        assert_eq!(out.salvage_notes, vec!["fenced_json", "object_unwrap"]);
    }

    #[test]
    fn kv_harvest_reads_plain_lines() {
        let raw = "Pyrexia: [fever, high temp]\nRash: [blotchy rash]";
        let out = distill(raw, "r1", &report(&["Pyrexia", "Rash"])).unwrap();
        assert_eq!(out.links["pyrexia"], vec!["fever", "high temp"]);
        assert_eq!(out.links["rash"], vec!["blotchy rash"]);
        assert_eq!(out.salvage_notes, vec!["kv_harvest"]);
    }

    #[test]
    fn distillation_is_idempotent_on_links() {
        let raw = r#"{"Pyrexia": ["fever"], "Decreased appetite": ["lack of appetite"]}"#;
        let rep = report(&["Pyrexia", "Decreased appetite"]);
        let first = distill(raw, "r1", &rep).unwrap();
        let reserialized = serde_json::to_string(&first.links).unwrap();
        let second = distill(&reserialized, "r1", &rep).unwrap();
        assert_eq!(first.links, second.links);
    }
}
