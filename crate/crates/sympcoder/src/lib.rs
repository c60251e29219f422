//! Symptom coding pipeline toolkit.
//!
//! Codes medical symptoms from unstructured adverse-event narratives with
//! LLMs and evaluates the results against gold annotations. The pipeline is:
//! ingest or load a dataset, render TACO (integrated) or TASI (sequential)
//! prompts, collect completions through a cached backend, distill the raw
//! output into a term-to-mention mapping, then score term linking (LINK:
//! exact / fuzzy / cascade precision and recall) and mention fidelity
//! (MATCH: BLEU, fuzzy ratio, embedding cosine).

pub mod analysis;
pub mod backends;
pub mod config;
pub mod corpus;
pub mod distill;
pub mod metrics;
pub mod pipeline;
pub mod prompting;

pub use corpus::{Dataset, GoldAnnotation, Report, SuggestedTerm};
pub use distill::{normalize_term, CodedOutput, ExtractionList};
pub use metrics::{fuzzy_ratio, LinkScores, MatchMode, MatchScores, TermAlignment};
pub use prompting::{Prompt, Strategy};
