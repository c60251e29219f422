//! End-to-end orchestration: prompt, complete, distill, score, record.
//!
//! Per-report work items run on a bounded worker pool; records append to
//! the results file as they complete. Completions persist to the
//! content-addressed cache before use, so an interrupted run repeats no
//! remote work when restarted.

use crate::analysis::{
    append_record, score_groups, EvaluationRecord, GroupScores, MatchPair, RunStrategy,
    UnpairedCounts,
};
use crate::backends::{
    BackendError, CompletionClient, DiskCache, EmbeddingClient, HttpChatBackend, HttpConfig,
    InferenceParams, MockChatBackend, OracleBackend, RemoteEmbedder, RetryPolicy,
};
use crate::config::{BackendConfig, ConfigError, EmbedderConfig, RunConfig};
use crate::corpus::{load_dataset, CorpusError, Dataset, GoldAnnotation, Report};
use crate::distill::{distill, distill_extraction, CodedOutput};
use crate::metrics::{align_mentions, mention_triple, Alignments, MetricsError};
use crate::prompting::{
    build_taco_prompt, build_tasi_prompts, PromptTemplate, TasiTemplates, TemplateError,
    TemplateKind,
};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Corpus(#[from] CorpusError),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error(transparent)]
    Template(#[from] TemplateError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 config, 3 io, 4 transport, 5 validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Template(_) => 2,
            PipelineError::Io { .. } => 3,
            PipelineError::Backend(e) => match e {
                BackendError::Transport { .. }
                | BackendError::Credential(_)
                | BackendError::BadResponse(_) => 4,
                BackendError::Cache(_) => 3,
                _ => 2,
            },
            PipelineError::Corpus(e) => match e {
                CorpusError::Io { .. } => 3,
                _ => 5,
            },
            PipelineError::Analysis(e) => match e {
                crate::analysis::AnalysisError::Io { .. } => 3,
                _ => 5,
            },
            PipelineError::Metrics(_) => 5,
        }
    }
}

/// Cooperative interruption: stop claiming new work after a fixed number
/// of items. Used to exercise resume-from-cache behavior.
#[derive(Default)]
pub struct RunControl {
    cancel_after: Option<usize>,
    claimed: AtomicUsize,
}

impl RunControl {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn cancel_after(items: usize) -> Self {
        Self {
            cancel_after: Some(items),
            claimed: AtomicUsize::new(0),
        }
    }

    fn try_claim(&self) -> bool {
        match self.cancel_after {
            None => {
                self.claimed.fetch_add(1, Ordering::SeqCst);
                true
            }
            Some(budget) => {
                let prior = self.claimed.fetch_add(1, Ordering::SeqCst);
                prior < budget
            }
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub results_path: PathBuf,
    pub scores_path: PathBuf,
    pub records: Vec<EvaluationRecord>,
    pub groups: Vec<GroupScores>,
    pub processed: usize,
    pub malformed: usize,
    pub interrupted: bool,
    /// Completions served from / fetched past the cache in this run.
    pub cache_hits: usize,
    pub fresh_completions: usize,
}

/// Everything a worker needs, borrowed immutably for the whole run.
struct RunContext {
    dataset: Dataset,
    completion: CompletionClient,
    embedder: EmbeddingClient,
    params: InferenceParams,
    taco: PromptTemplate,
    tasi: TasiTemplates,
    threshold: f64,
    model: String,
}

pub fn build_completion_client(
    config: &RunConfig,
    dataset: &Dataset,
) -> Result<CompletionClient, PipelineError> {
    let cache = DiskCache::new(config.cache_dir.join("completions"))
        .map_err(BackendError::Cache)?;
    let backend: Box<dyn crate::backends::ChatBackend> = match &config.backend {
        BackendConfig::Http {
            base_url,
            api_key_env,
            requests_per_sec,
            retry_attempts,
            retry_backoff_ms,
            retry_on_truncation,
            ..
        } => {
            let mut http = HttpConfig::new(base_url.clone());
            http.api_key = std::env::var(api_key_env).ok();
            http.requests_per_sec = *requests_per_sec;
            http.retry = RetryPolicy {
                max_attempts: *retry_attempts,
                initial_backoff: std::time::Duration::from_millis(*retry_backoff_ms),
                retry_on_truncation: *retry_on_truncation,
            };
            Box::new(HttpChatBackend::new(http)?)
        }
        BackendConfig::Mock { text } => Box::new(MockChatBackend::fixed(text.clone())),
        BackendConfig::Oracle { noise } => {
            Box::new(OracleBackend::new(dataset.clone(), noise.clone()))
        }
    };
    Ok(CompletionClient::new(backend, Some(cache)))
}

pub fn build_embedding_client(config: &RunConfig) -> Result<EmbeddingClient, PipelineError> {
    let cache =
        DiskCache::new(config.cache_dir.join("embeddings")).map_err(BackendError::Cache)?;
    let embedder: Box<dyn crate::backends::Embedder> = match &config.embedder {
        EmbedderConfig::Offline => Box::new(crate::backends::OfflineEmbedder::default()),
        EmbedderConfig::Remote {
            base_url,
            model,
            api_key_env,
        } => {
            let mut http = HttpConfig::new(base_url.clone());
            http.api_key = std::env::var(api_key_env).ok();
            Box::new(RemoteEmbedder::new(http, model.clone())?)
        }
    };
    Ok(EmbeddingClient::new(embedder, Some(cache)))
}

fn load_templates(config: &RunConfig) -> Result<(PromptTemplate, TasiTemplates), PipelineError> {
    let taco = match &config.templates.taco {
        Some(path) => PromptTemplate::load(TemplateKind::Taco, path)?,
        None => PromptTemplate::default_taco(),
    };
    let phase1 = match &config.templates.tasi_phase1 {
        Some(path) => PromptTemplate::load(TemplateKind::TasiPhase1, path)?,
        None => PromptTemplate::default_tasi_phase1(),
    };
    let phase2 = match &config.templates.tasi_phase2 {
        Some(path) => PromptTemplate::load(TemplateKind::TasiPhase2, path)?,
        None => PromptTemplate::default_tasi_phase2(),
    };
    Ok((taco, TasiTemplates { phase1, phase2 }))
}

fn inference_params(config: &RunConfig) -> InferenceParams {
    match &config.backend {
        BackendConfig::Http {
            model,
            max_new_tokens,
            temperature,
            ..
        } => InferenceParams {
            model: model.clone(),
            max_new_tokens: *max_new_tokens,
            temperature: *temperature,
        },
        BackendConfig::Mock { .. } => InferenceParams::new("mock"),
        BackendConfig::Oracle { .. } => InferenceParams::new("oracle"),
    }
}

/// Execute a full run: every report crossed with every selected strategy.
pub fn run(config: &RunConfig, control: &RunControl) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let dataset = load_dataset(&config.dataset)?;
    let completion = build_completion_client(config, &dataset)?;
    let embedder = build_embedding_client(config)?;
    run_with_clients(config, control, completion, embedder)
}

/// Like [`run`], with caller-supplied clients (useful for instrumented
/// backends in tests).
pub fn run_with_clients(
    config: &RunConfig,
    control: &RunControl,
    completion: CompletionClient,
    embedder: EmbeddingClient,
) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let dataset = load_dataset(&config.dataset)?;
    completion.probe()?;
    let (taco, tasi) = load_templates(config)?;
    let params = inference_params(config);
    let context = RunContext {
        model: config.backend.model_name(),
        dataset,
        completion,
        embedder,
        params,
        taco,
        tasi,
        threshold: config.fuzzy_threshold,
    };

    std::fs::create_dir_all(&config.output_dir).map_err(|source| PipelineError::Io {
        path: config.output_dir.display().to_string(),
        source,
    })?;
    let results_path = config.output_dir.join("results.jsonl");
    let mut results_file =
        std::fs::File::create(&results_path).map_err(|source| PipelineError::Io {
            path: results_path.display().to_string(),
            source,
        })?;

    let report_count = match config.limit {
        Some(limit) => limit.min(context.dataset.len()),
        None => context.dataset.len(),
    };
    let items: Vec<(usize, RunStrategy)> = (0..report_count)
        .flat_map(|idx| {
            config
                .strategy
                .runs()
                .into_iter()
                .map(move |strategy| (idx, strategy))
        })
        .collect();

    let next_item = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let (sender, receiver) = mpsc::channel::<Result<EvaluationRecord, PipelineError>>();
    let workers = config.concurrency.min(items.len().max(1));
    let mut records = Vec::new();
    let mut first_error: Option<PipelineError> = None;
    let mut interrupted = false;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let sender = sender.clone();
            let context = &context;
            let items = &items;
            let next_item = &next_item;
            let abort = &abort;
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let index = next_item.fetch_add(1, Ordering::SeqCst);
                if index >= items.len() || !control.try_claim() {
                    break;
                }
                let (report_idx, strategy) = items[index];
                let started = Instant::now();
                let result = process_item(context, report_idx, strategy);
                if let Ok(record) = &result {
                    log::info!(
                        "report {} [{}] scored in {:?} (salvage: {:?})",
                        record.id,
                        strategy.label(),
                        started.elapsed(),
                        record.salvage_notes
                    );
                }
                if sender.send(result).is_err() {
                    break;
                }
            });
        }
        drop(sender);
        for result in receiver {
            match result {
                Ok(record) => {
                    if let Err(source) = append_record(&mut results_file, &record) {
                        abort.store(true, Ordering::SeqCst);
                        first_error.get_or_insert(PipelineError::Io {
                            path: results_path.display().to_string(),
                            source,
                        });
                        continue;
                    }
                    records.push(record);
                }
                Err(error) => {
                    abort.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(error);
                }
            }
        }
    });

    if let Some(error) = first_error {
        return Err(error);
    }
    if records.len() < items.len() {
        interrupted = true;
    }

    use std::io::Write;
    results_file.flush().map_err(|source| PipelineError::Io {
        path: results_path.display().to_string(),
        source,
    })?;

    let malformed = records
        .iter()
        .filter(|r| r.salvage_notes.iter().any(|n| n.contains("malformed")))
        .count();
    let groups = if records.is_empty() {
        Vec::new()
    } else {
        score_groups(&records, config.unpaired_policy)?
    };
    let scores_path = config.output_dir.join("scores.json");
    std::fs::write(&scores_path, crate::analysis::export_groups_json(&groups)).map_err(
        |source| PipelineError::Io {
            path: scores_path.display().to_string(),
            source,
        },
    )?;

    Ok(RunOutcome {
        results_path,
        scores_path,
        processed: records.len(),
        malformed,
        records,
        groups,
        interrupted,
        cache_hits: context.completion.cache_hits(),
        fresh_completions: context.completion.cache_misses(),
    })
}

fn process_item(
    context: &RunContext,
    report_idx: usize,
    strategy: RunStrategy,
) -> Result<EvaluationRecord, PipelineError> {
    let report = &context.dataset.reports[report_idx];
    let gold = context.dataset.gold_for(&report.id);
    let (coded, raw_ref) = match strategy {
        RunStrategy::Taco => {
            let prompt = build_taco_prompt(report, &context.taco)?;
            let completion = context.completion.complete(&prompt, &context.params)?;
            let coded = distill_or_empty(&completion.text, report, completion.truncated);
            (coded, completion.prompt_fingerprint)
        }
        RunStrategy::Tasi => {
            let (phase1, continuation) = build_tasi_prompts(report, &context.tasi)?;
            let completion1 = context.completion.complete(&phase1, &context.params)?;
            let extraction = match distill_extraction(&completion1.text, &report.id) {
                Ok(list) => list,
                Err(_) => {
                    log::warn!("report {}: phase-1 output malformed, continuing with empty list", report.id);
                    crate::distill::ExtractionList {
                        report_id: report.id.clone(),
                        mentions: Vec::new(),
                        salvage_notes: vec!["malformed_phase1".into()],
                    }
                }
            };
            let phase2 = continuation.render(&extraction.mentions);
            let completion2 = context.completion.complete(&phase2, &context.params)?;
            let mut coded = distill_or_empty(&completion2.text, report, completion2.truncated);
            let mut notes: Vec<String> = extraction
                .salvage_notes
                .iter()
                .map(|n| format!("phase1:{n}"))
                .collect();
            notes.append(&mut coded.salvage_notes);
            coded.salvage_notes = notes;
            (coded, completion2.prompt_fingerprint)
        }
    };
    score_coded_output(
        report,
        gold,
        &coded,
        &context.model,
        strategy,
        raw_ref,
        context.threshold,
        &context.embedder,
    )
    .map_err(PipelineError::from)
}

fn distill_or_empty(raw_text: &str, report: &Report, truncated: bool) -> CodedOutput {
    match distill(raw_text, &report.id, report) {
        Ok(mut coded) => {
            if truncated {
                coded.salvage_notes.insert(0, "truncated_completion".into());
            }
            coded
        }
        Err(_) => {
            log::warn!("report {}: output malformed, scoring empty prediction", report.id);
            let mut coded = CodedOutput::empty(&report.id);
            coded.salvage_notes.push("malformed_output".into());
            coded
        }
    }
}

/// Score one distilled output against gold: all three LINK alignments plus
/// per-pair MATCH triples over the cascade-aligned terms.
#[allow(clippy::too_many_arguments)]
pub fn score_coded_output(
    report: &Report,
    gold: Option<&GoldAnnotation>,
    coded: &CodedOutput,
    model: &str,
    strategy: RunStrategy,
    raw_ref: String,
    threshold: f64,
    embedder: &EmbeddingClient,
) -> Result<EvaluationRecord, BackendError> {
    let predicted: Vec<String> = coded.links.keys().cloned().collect();
    let gold_terms: Vec<String> = gold
        .map(|g| g.links.keys().cloned().collect())
        .unwrap_or_default();
    let alignments = Alignments::compute(&predicted, &gold_terms, threshold);

    let gold_by_norm: std::collections::BTreeMap<String, &Vec<String>> = gold
        .map(|g| {
            g.links
                .iter()
                .map(|(t, m)| (crate::distill::normalize_term(t), m))
                .collect()
        })
        .unwrap_or_default();

    let mut match_pairs = Vec::new();
    let mut unpaired = UnpairedCounts::default();
    for pair in &alignments.em_fuzzy.pairs {
        let empty = Vec::new();
        let pred_mentions = coded.links.get(&pair.predicted).unwrap_or(&empty);
        let gold_mentions = gold_by_norm.get(&pair.gold).copied().unwrap_or(&empty);
        let mention_alignment = align_mentions(pred_mentions, gold_mentions);
        for (pred, gold_mention) in mention_alignment.pairs {
            let triple = mention_triple(&pred, &gold_mention, embedder)?;
            match_pairs.push(MatchPair {
                term: pair.gold.clone(),
                pred,
                gold: gold_mention,
                bleu: triple.bleu,
                fuzzy: triple.fuzzy,
                cosine: triple.cosine,
            });
        }
        unpaired.predicted += mention_alignment.unpaired_predicted.len();
        unpaired.gold += mention_alignment.unpaired_gold.len();
    }

    Ok(EvaluationRecord {
        id: report.id.clone(),
        model: model.to_string(),
        strategy,
        raw_ref,
        links: coded.links.clone(),
        alignments,
        match_pairs,
        unpaired_mentions: unpaired,
        salvage_notes: coded.salvage_notes.clone(),
        unlinkable_keys: coded.unlinkable_keys.clone(),
    })
}

/// Re-score existing records against the dataset (for example after
/// changing the fuzzy threshold). Completion caches are untouched.
pub fn rescore_records(
    records: &[EvaluationRecord],
    dataset: &Dataset,
    threshold: f64,
    embedder: &EmbeddingClient,
) -> Result<Vec<EvaluationRecord>, PipelineError> {
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        let report = dataset.report(&record.id).ok_or_else(|| {
            PipelineError::Analysis(crate::analysis::AnalysisError::NotFound(record.id.clone()))
        })?;
        let coded = CodedOutput {
            report_id: record.id.clone(),
            links: record.links.clone(),
            unlinkable_keys: record.unlinkable_keys.clone(),
            salvage_notes: record.salvage_notes.clone(),
        };
        out.push(score_coded_output(
            report,
            dataset.gold_for(&record.id),
            &coded,
            &record.model,
            record.strategy,
            record.raw_ref.clone(),
            threshold,
            embedder,
        )?);
    }
    Ok(out)
}

/// Re-distill cached raw completions and re-score. Fails when a record's
/// completion is missing from the cache.
pub fn redistill_records(
    records: &[EvaluationRecord],
    dataset: &Dataset,
    completion: &CompletionClient,
    threshold: f64,
    embedder: &EmbeddingClient,
) -> Result<Vec<EvaluationRecord>, PipelineError> {
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        let report = dataset.report(&record.id).ok_or_else(|| {
            PipelineError::Analysis(crate::analysis::AnalysisError::NotFound(record.id.clone()))
        })?;
        let cached = completion.cached(&record.raw_ref)?.ok_or_else(|| {
            PipelineError::Backend(BackendError::BadResponse(format!(
                "completion {} for report {} is not cached",
                record.raw_ref, record.id
            )))
        })?;
        let mut coded = distill_or_empty(&cached.text, report, cached.truncated);
        // phase-1 notes describe a completion this pass does not touch
        let mut notes: Vec<String> = record
            .salvage_notes
            .iter()
            .filter(|n| n.starts_with("phase1:"))
            .cloned()
            .collect();
        notes.append(&mut coded.salvage_notes);
        coded.salvage_notes = notes;
        out.push(score_coded_output(
            report,
            dataset.gold_for(&record.id),
            &coded,
            &record.model,
            record.strategy,
            record.raw_ref.clone(),
            threshold,
            embedder,
        )?);
    }
    Ok(out)
}
