//! Prompt construction for the two coding strategies.
//!
//! TACO renders one integrated prompt that extracts symptom mentions and
//! links them to the suggested terms in a single step. TASI renders an
//! extraction-only prompt first, then a linking prompt that embeds the
//! distilled extraction list. Templates follow a four-part structure:
//! clinical text, header instructions, body guidelines, and an output
//! format specification with one worked example.

use crate::corpus::Report;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLACEHOLDER_CLINICAL_TEXT: &str = "{clinical_text}";
pub const PLACEHOLDER_SUGGESTED_TERMS: &str = "{suggested_terms}";
pub const PLACEHOLDER_EXTRACTED_LIST: &str = "{extracted_list}";

const DEFAULT_TACO: &str = include_str!("../templates/taco.tmpl");
const DEFAULT_TASI_PHASE1: &str = include_str!("../templates/tasi_phase1.tmpl");
const DEFAULT_TASI_PHASE2: &str = include_str!("../templates/tasi_phase2.tmpl");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template section [{0}] is missing")]
    MissingSection(String),

    #[error("unknown template section [{0}]")]
    UnknownSection(String),

    #[error("required placeholder {0} is missing")]
    MissingPlaceholder(String),

    #[error("placeholder {0} must appear exactly once, found {1}")]
    PlaceholderCount(String, usize),

    #[error("placeholder {0} is not valid for this template kind")]
    ForeignPlaceholder(String),

    #[error("report has no suggested terms")]
    EmptySuggested,
}

/// Which prompt a template renders; governs the required placeholder set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Taco,
    TasiPhase1,
    TasiPhase2,
}

impl TemplateKind {
    fn required(&self) -> &'static [&'static str] {
        match self {
            TemplateKind::Taco => &[PLACEHOLDER_CLINICAL_TEXT, PLACEHOLDER_SUGGESTED_TERMS],
            TemplateKind::TasiPhase1 => &[PLACEHOLDER_CLINICAL_TEXT],
            TemplateKind::TasiPhase2 => &[
                PLACEHOLDER_CLINICAL_TEXT,
                PLACEHOLDER_SUGGESTED_TERMS,
                PLACEHOLDER_EXTRACTED_LIST,
            ],
        }
    }
}

const ALL_PLACEHOLDERS: [&str; 3] = [
    PLACEHOLDER_CLINICAL_TEXT,
    PLACEHOLDER_SUGGESTED_TERMS,
    PLACEHOLDER_EXTRACTED_LIST,
];

/// Prompt strategy tag carried on every rendered prompt, used for cache
/// keying and routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Taco,
    TasiPhase1,
    TasiPhase2,
}

/// A fully rendered prompt with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub strategy: Strategy,
    pub report_id: String,
}

/// A three-section prompt template. Validated at construction: every
/// placeholder its kind requires appears exactly once across the
/// concatenated sections, and no foreign placeholder appears at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: TemplateKind,
    header: String,
    body: String,
    output_instruction: String,
}

impl PromptTemplate {
    /// Parse `[header]` / `[body]` / `[output_instruction]` sections.
    pub fn parse(kind: TemplateKind, source: &str) -> Result<Self, TemplateError> {
        let mut sections: std::collections::BTreeMap<&str, String> =
            std::collections::BTreeMap::new();
        let mut current: Option<&str> = None;
        for line in source.lines() {
            match line.trim() {
                "[header]" => current = Some("header"),
                "[body]" => current = Some("body"),
                "[output_instruction]" => current = Some("output_instruction"),
                trimmed if trimmed.starts_with('[') && trimmed.ends_with(']') => {
                    return Err(TemplateError::UnknownSection(
                        trimmed.trim_matches(['[', ']']).to_string(),
                    ));
                }
                _ => {
                    if let Some(name) = current {
                        let entry = sections.entry(name).or_default();
                        entry.push_str(line);
                        entry.push('\n');
                    }
                }
            }
        }
        let mut take = |name: &str| -> Result<String, TemplateError> {
            sections
                .remove(name)
                .map(|s| s.trim_end().to_string())
                .ok_or_else(|| TemplateError::MissingSection(name.to_string()))
        };
        let template = Self {
            kind,
            header: take("header")?,
            body: take("body")?,
            output_instruction: take("output_instruction")?,
        };
        template.validate()?;
        Ok(template)
    }

    pub fn load(kind: TemplateKind, path: &std::path::Path) -> Result<Self, TemplateError> {
        let source = std::fs::read_to_string(path)
            .map_err(|_| TemplateError::MissingSection(path.display().to_string()))?;
        Self::parse(kind, &source)
    }

    pub fn default_taco() -> Self {
        Self::parse(TemplateKind::Taco, DEFAULT_TACO).expect("shipped template is valid")
    }

    pub fn default_tasi_phase1() -> Self {
        Self::parse(TemplateKind::TasiPhase1, DEFAULT_TASI_PHASE1)
            .expect("shipped template is valid")
    }

    pub fn default_tasi_phase2() -> Self {
        Self::parse(TemplateKind::TasiPhase2, DEFAULT_TASI_PHASE2)
            .expect("shipped template is valid")
    }

    fn concatenated(&self) -> String {
        format!("{}\n\n{}\n\n{}", self.header, self.body, self.output_instruction)
    }

    fn validate(&self) -> Result<(), TemplateError> {
        let text = self.concatenated();
        let required = self.kind.required();
        for placeholder in ALL_PLACEHOLDERS {
            let count = text.matches(placeholder).count();
            if required.contains(&placeholder) {
                match count {
                    0 => return Err(TemplateError::MissingPlaceholder(placeholder.into())),
                    1 => {}
                    n => {
                        return Err(TemplateError::PlaceholderCount(placeholder.into(), n));
                    }
                }
            } else if count > 0 {
                return Err(TemplateError::ForeignPlaceholder(placeholder.into()));
            }
        }
        Ok(())
    }

    fn render(&self, substitutions: &[(&str, &str)]) -> String {
        let mut text = self.concatenated();
        for (placeholder, value) in substitutions {
            text = text.replacen(placeholder, value, 1);
        }
        text
    }
}

/// Suggested terms rendered as a comma-separated quoted list, report order.
fn render_suggested(report: &Report) -> String {
    report
        .suggested
        .iter()
        .map(|s| format!("\"{}\"", s.term))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Extraction list rendered as a JSON array; empty input renders `[]`.
fn render_extracted(mentions: &[String]) -> String {
    serde_json::to_string(mentions).expect("string list serialization cannot fail")
}

/// Render the integrated prompt: extract mentions and map each to one of
/// the suggested terms in a single step.
pub fn build_taco_prompt(report: &Report, template: &PromptTemplate) -> Result<Prompt, TemplateError> {
    if report.suggested.is_empty() {
        return Err(TemplateError::EmptySuggested);
    }
    let text = template.render(&[
        (PLACEHOLDER_CLINICAL_TEXT, &report.text),
        (PLACEHOLDER_SUGGESTED_TERMS, &render_suggested(report)),
    ]);
    Ok(Prompt {
        text,
        strategy: Strategy::Taco,
        report_id: report.id.clone(),
    })
}

/// The sequential template pair.
#[derive(Debug, Clone)]
pub struct TasiTemplates {
    pub phase1: PromptTemplate,
    pub phase2: PromptTemplate,
}

impl Default for TasiTemplates {
    fn default() -> Self {
        Self {
            phase1: PromptTemplate::default_tasi_phase1(),
            phase2: PromptTemplate::default_tasi_phase2(),
        }
    }
}

/// Pending phase-two render: holds everything except the extraction list.
pub struct TasiContinuation {
    template: PromptTemplate,
    report_id: String,
    clinical_text: String,
    suggested: String,
}

impl TasiContinuation {
    /// Render the linking prompt around the distilled phase-one list. An
    /// empty list renders an explicit empty array so the model may recover.
    pub fn render(&self, extracted: &[String]) -> Prompt {
        let text = self.template.render(&[
            (PLACEHOLDER_CLINICAL_TEXT, &self.clinical_text),
            (PLACEHOLDER_SUGGESTED_TERMS, &self.suggested),
            (PLACEHOLDER_EXTRACTED_LIST, &render_extracted(extracted)),
        ]);
        Prompt {
            text,
            strategy: Strategy::TasiPhase2,
            report_id: self.report_id.clone(),
        }
    }
}

/// Render the extraction prompt and a continuation for the linking phase.
/// The phase-one prompt carries the clinical text but not the suggested
/// terms; the continuation re-embeds the narrative so linking keeps its
/// context.
pub fn build_tasi_prompts(
    report: &Report,
    templates: &TasiTemplates,
) -> Result<(Prompt, TasiContinuation), TemplateError> {
    if report.suggested.is_empty() {
        return Err(TemplateError::EmptySuggested);
    }
    let phase1 = Prompt {
        text: templates
            .phase1
            .render(&[(PLACEHOLDER_CLINICAL_TEXT, &report.text)]),
        strategy: Strategy::TasiPhase1,
        report_id: report.id.clone(),
    };
    let continuation = TasiContinuation {
        template: templates.phase2.clone(),
        report_id: report.id.clone(),
        clinical_text: report.text.clone(),
        suggested: render_suggested(report),
    };
    Ok((phase1, continuation))
}
