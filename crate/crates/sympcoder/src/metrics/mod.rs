//! Two-stage evaluation metrics.
//!
//! LINK scores term-linking accuracy: precision and recall under exact
//! matching (EM), fuzzy matching, and the EM-then-fuzzy cascade, all
//! micro-averaged over the corpus. MATCH scores mention fidelity for the
//! aligned terms: BLEU, normalized-edit fuzzy ratio, and embedding cosine.

mod assignment;

use crate::backends::EmbeddingClient;
use crate::distill::normalize_term;
use assignment::lex_optimal_matching;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input: no alignments supplied")]
    EmptyInput,

    #[error("vector length mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("degenerate zero vector")]
    DegenerateVector,
}

/// Default fuzzy-match threshold for LINK alignment.
pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.8;

/// Character-level Levenshtein edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Normalized edit similarity over canonical term forms:
/// `1 - lev(na, nb) / max(|na|, |nb|)`. Two empty strings score 1.0.
pub fn fuzzy_ratio(a: &str, b: &str) -> f64 {
    let na = normalize_term(a);
    let nb = normalize_term(b);
    let max_len = na.chars().count().max(nb.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&na, &nb) as f64 / max_len as f64
}

/// Term-matching regime for the LINK stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Em,
    Fuzzy,
    EmFuzzy,
}

impl MatchMode {
    pub const ALL: [MatchMode; 3] = [MatchMode::Em, MatchMode::Fuzzy, MatchMode::EmFuzzy];

    pub fn label(&self) -> &'static str {
        match self {
            MatchMode::Em => "EM",
            MatchMode::Fuzzy => "Fuzzy",
            MatchMode::EmFuzzy => "EM-Fuzzy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Exact,
    Fuzzy,
}

/// One matched (predicted, gold) term pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub predicted: String,
    pub gold: String,
    pub kind: PairKind,
    pub similarity: f64,
}

/// One-to-one matching between predicted and gold term sets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TermAlignment {
    pub pairs: Vec<AlignedPair>,
    pub unmatched_predicted: Vec<String>,
    pub unmatched_gold: Vec<String>,
}

impl TermAlignment {
    pub fn predicted_count(&self) -> usize {
        self.pairs.len() + self.unmatched_predicted.len()
    }

    pub fn gold_count(&self) -> usize {
        self.pairs.len() + self.unmatched_gold.len()
    }
}

/// Align predicted terms to gold terms. Inputs are normalized and
/// deduplicated internally; sets are compared as follows:
///
/// - `Em`: pairs with equal normalization.
/// - `Fuzzy`: maximum-total-similarity one-to-one assignment among pairs
///   with `fuzzy_ratio >= threshold`, ties preferring lexicographically
///   earlier (predicted, gold) pairs.
/// - `EmFuzzy`: the EM pass first, then the fuzzy pass on both sides'
///   leftovers.
pub fn match_terms(
    predicted: &[String],
    gold: &[String],
    mode: MatchMode,
    threshold: f64,
) -> TermAlignment {
    let predicted = normalize_set(predicted);
    let gold = normalize_set(gold);
    match mode {
        MatchMode::Em => {
            let (pairs, rest_p, rest_g) = exact_pass(&predicted, &gold);
            TermAlignment {
                pairs,
                unmatched_predicted: rest_p,
                unmatched_gold: rest_g,
            }
        }
        MatchMode::Fuzzy => {
            let (pairs, rest_p, rest_g) = fuzzy_pass(&predicted, &gold, threshold);
            TermAlignment {
                pairs,
                unmatched_predicted: rest_p,
                unmatched_gold: rest_g,
            }
        }
        MatchMode::EmFuzzy => {
            let (mut pairs, rest_p, rest_g) = exact_pass(&predicted, &gold);
            let (fuzzy_pairs, rest_p, rest_g) = fuzzy_pass(&rest_p, &rest_g, threshold);
            pairs.extend(fuzzy_pairs);
            pairs.sort_by(|a, b| a.predicted.cmp(&b.predicted));
            TermAlignment {
                pairs,
                unmatched_predicted: rest_p,
                unmatched_gold: rest_g,
            }
        }
    }
}

fn normalize_set(terms: &[String]) -> Vec<String> {
    let set: BTreeSet<String> = terms
        .iter()
        .map(|t| normalize_term(t))
        .filter(|t| !t.is_empty())
        .collect();
    set.into_iter().collect()
}

fn exact_pass(
    predicted: &[String],
    gold: &[String],
) -> (Vec<AlignedPair>, Vec<String>, Vec<String>) {
    let gold_set: BTreeSet<&String> = gold.iter().collect();
    let mut pairs = Vec::new();
    let mut rest_p = Vec::new();
    for p in predicted {
        if gold_set.contains(p) {
            pairs.push(AlignedPair {
                predicted: p.clone(),
                gold: p.clone(),
                kind: PairKind::Exact,
                similarity: 1.0,
            });
        } else {
            rest_p.push(p.clone());
        }
    }
    let matched: BTreeSet<&String> = pairs.iter().map(|pair| &pair.gold).collect();
    let rest_g = gold
        .iter()
        .filter(|g| !matched.contains(g))
        .cloned()
        .collect();
    (pairs, rest_p, rest_g)
}

fn fuzzy_pass(
    predicted: &[String],
    gold: &[String],
    threshold: f64,
) -> (Vec<AlignedPair>, Vec<String>, Vec<String>) {
    if predicted.is_empty() || gold.is_empty() {
        return (Vec::new(), predicted.to_vec(), gold.to_vec());
    }
    let weights: Vec<Vec<Option<f64>>> = predicted
        .iter()
        .map(|p| {
            gold.iter()
                .map(|g| {
                    let r = fuzzy_ratio(p, g);
                    (r >= threshold).then_some(r)
                })
                .collect()
        })
        .collect();
    let matching = lex_optimal_matching(&weights);
    let mut used_p = vec![false; predicted.len()];
    let mut used_g = vec![false; gold.len()];
    let mut pairs = Vec::new();
    for (i, j) in matching {
        used_p[i] = true;
        used_g[j] = true;
        let similarity = weights[i][j].expect("matched pair is admissible");
        pairs.push(AlignedPair {
            predicted: predicted[i].clone(),
            gold: gold[j].clone(),
            kind: if predicted[i] == gold[j] {
                PairKind::Exact
            } else {
                PairKind::Fuzzy
            },
            similarity,
        });
    }
    let rest_p = predicted
        .iter()
        .enumerate()
        .filter(|(i, _)| !used_p[*i])
        .map(|(_, p)| p.clone())
        .collect();
    let rest_g = gold
        .iter()
        .enumerate()
        .filter(|(j, _)| !used_g[*j])
        .map(|(_, g)| g.clone())
        .collect();
    (pairs, rest_p, rest_g)
}

/// Micro-sums for one matching mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeSums {
    pub matched: u64,
    pub predicted: u64,
    pub gold: u64,
}

impl ModeSums {
    pub fn add(&mut self, alignment: &TermAlignment) {
        self.matched += alignment.pairs.len() as u64;
        self.predicted += alignment.predicted_count() as u64;
        self.gold += alignment.gold_count() as u64;
    }

    /// `None` when the corpus has zero predictions (0/0 is reported as
    /// null, never silently as zero).
    pub fn precision(&self) -> Option<f64> {
        (self.predicted > 0).then(|| self.matched as f64 / self.predicted as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.gold > 0).then(|| self.matched as f64 / self.gold as f64)
    }
}

/// Corpus-level LINK results: micro-averaged precision and recall for all
/// three matching modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkScores {
    pub em: ModeSums,
    pub fuzzy: ModeSums,
    pub em_fuzzy: ModeSums,
}

impl LinkScores {
    pub fn mode(&self, mode: MatchMode) -> &ModeSums {
        match mode {
            MatchMode::Em => &self.em,
            MatchMode::Fuzzy => &self.fuzzy,
            MatchMode::EmFuzzy => &self.em_fuzzy,
        }
    }

    pub fn mode_mut(&mut self, mode: MatchMode) -> &mut ModeSums {
        match mode {
            MatchMode::Em => &mut self.em,
            MatchMode::Fuzzy => &mut self.fuzzy,
            MatchMode::EmFuzzy => &mut self.em_fuzzy,
        }
    }

    pub fn add_report(&mut self, mode: MatchMode, alignment: &TermAlignment) {
        self.mode_mut(mode).add(alignment);
    }
}

/// Per-report alignments in all three modes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Alignments {
    pub em: TermAlignment,
    pub fuzzy: TermAlignment,
    pub em_fuzzy: TermAlignment,
}

impl Alignments {
    pub fn compute(predicted: &[String], gold: &[String], threshold: f64) -> Self {
        Self {
            em: match_terms(predicted, gold, MatchMode::Em, threshold),
            fuzzy: match_terms(predicted, gold, MatchMode::Fuzzy, threshold),
            em_fuzzy: match_terms(predicted, gold, MatchMode::EmFuzzy, threshold),
        }
    }

    pub fn mode(&self, mode: MatchMode) -> &TermAlignment {
        match mode {
            MatchMode::Em => &self.em,
            MatchMode::Fuzzy => &self.fuzzy,
            MatchMode::EmFuzzy => &self.em_fuzzy,
        }
    }
}

/// Micro-average LINK scores over per-report alignments.
pub fn link_scores<'a>(
    alignments: impl IntoIterator<Item = &'a Alignments>,
) -> Result<LinkScores, MetricsError> {
    let mut scores = LinkScores::default();
    let mut seen = false;
    for per_report in alignments {
        seen = true;
        for mode in MatchMode::ALL {
            scores.add_report(mode, per_report.mode(mode));
        }
    }
    if !seen {
        return Err(MetricsError::EmptyInput);
    }
    Ok(scores)
}

/// One-to-one mention pairing between a predicted and a gold mention list,
/// maximizing total fuzzy ratio with no threshold. Unpaired mentions are
/// reported for coverage accounting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MentionAlignment {
    pub pairs: Vec<(String, String)>,
    pub unpaired_predicted: Vec<String>,
    pub unpaired_gold: Vec<String>,
}

pub fn align_mentions(pred_mentions: &[String], gold_mentions: &[String]) -> MentionAlignment {
    if pred_mentions.is_empty() || gold_mentions.is_empty() {
        return MentionAlignment {
            pairs: Vec::new(),
            unpaired_predicted: pred_mentions.to_vec(),
            unpaired_gold: gold_mentions.to_vec(),
        };
    }
    // Sort indices by string so assignment tie-breaks follow text order.
    let mut p_order: Vec<usize> = (0..pred_mentions.len()).collect();
    p_order.sort_by(|&a, &b| pred_mentions[a].cmp(&pred_mentions[b]));
    let mut g_order: Vec<usize> = (0..gold_mentions.len()).collect();
    g_order.sort_by(|&a, &b| gold_mentions[a].cmp(&gold_mentions[b]));

    let weights: Vec<Vec<Option<f64>>> = p_order
        .iter()
        .map(|&pi| {
            g_order
                .iter()
                .map(|&gi| Some(fuzzy_ratio(&pred_mentions[pi], &gold_mentions[gi])))
                .collect()
        })
        .collect();
    let matching = lex_optimal_matching(&weights);
    let mut used_p = vec![false; pred_mentions.len()];
    let mut used_g = vec![false; gold_mentions.len()];
    let mut pairs = Vec::new();
    for (i, j) in matching {
        let (pi, gi) = (p_order[i], g_order[j]);
        used_p[pi] = true;
        used_g[gi] = true;
        pairs.push((pred_mentions[pi].clone(), gold_mentions[gi].clone()));
    }
    MentionAlignment {
        pairs,
        unpaired_predicted: pred_mentions
            .iter()
            .enumerate()
            .filter(|(i, _)| !used_p[*i])
            .map(|(_, m)| m.clone())
            .collect(),
        unpaired_gold: gold_mentions
            .iter()
            .enumerate()
            .filter(|(i, _)| !used_g[*i])
            .map(|(_, m)| m.clone())
            .collect(),
    }
}

/// Sentence-level BLEU over canonicalized tokens: modified n-gram precision
/// for n = 1..min(4, candidate length), add-one smoothing on orders above
/// unigram, geometric mean, and brevity penalty against the closest-length
/// reference. An empty candidate scores 0.
pub fn bleu(candidate: &str, references: &[String]) -> f64 {
    let cand = tokens_of(candidate);
    if cand.is_empty() || references.is_empty() {
        return 0.0;
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokens_of(r)).collect();
    let max_order = cand.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=max_order {
        let cand_counts = ngram_counts(&cand, n);
        let total: u64 = cand_counts.values().sum();
        let mut clipped = 0u64;
        for (gram, count) in &cand_counts {
            let best_ref = refs
                .iter()
                .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            clipped += (*count).min(best_ref);
        }
        let precision = if n == 1 {
            clipped as f64 / total as f64
        } else {
            (clipped + 1) as f64 / (total + 1) as f64
        };
        if precision == 0.0 {
            return 0.0;
        }
        log_sum += precision.ln();
    }
    let geometric_mean = (log_sum / max_order as f64).exp();
    let closest_ref_len = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(cand.len()), len))
        .unwrap_or(0);
    let brevity = if cand.len() >= closest_ref_len {
        1.0
    } else {
        (1.0 - closest_ref_len as f64 / cand.len() as f64).exp()
    };
    brevity * geometric_mean
}

fn tokens_of(s: &str) -> Vec<String> {
    let normalized = normalize_term(s);
    if normalized.is_empty() {
        Vec::new()
    } else {
        normalized.split(' ').map(str::to_string).collect()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> std::collections::HashMap<&[String], u64> {
    let mut counts = std::collections::HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Cosine similarity of two equal-length, nonzero vectors.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, MetricsError> {
    if u.len() != v.len() {
        return Err(MetricsError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let norm_u: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_v: f64 = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm_u == 0.0 || norm_v == 0.0 {
        return Err(MetricsError::DegenerateVector);
    }
    Ok(dot / (norm_u * norm_v))
}

/// The three MATCH measurements for one aligned mention pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchTriple {
    pub bleu: f64,
    pub fuzzy: f64,
    pub cosine: f64,
}

/// How mentions without a counterpart enter the MATCH means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnpairedPolicy {
    /// Excluded from the means, counted only in coverage.
    #[default]
    Exclude,
    /// Each unpaired mention contributes a zero sample to every mean.
    ScoreAsZero,
}

/// Corpus-level MATCH results. Scores are `None` when no mention pair was
/// aligned anywhere (empty coverage).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchScores {
    pub bleu: Option<f64>,
    pub fuzzy: Option<f64>,
    pub cosine: Option<f64>,
    pub pair_count: usize,
    pub unpaired_predicted: usize,
    pub unpaired_gold: usize,
}

impl MatchScores {
    pub fn empty_coverage(&self) -> bool {
        self.pair_count == 0
    }
}

/// Aggregate per-pair MATCH triples into corpus means. Per-pair cosine
/// values stay raw in the records; the reported mean is floored at 0 so
/// signed remote embeddings cannot push it outside [0, 1].
pub fn aggregate_match(
    triples: &[MatchTriple],
    unpaired_predicted: usize,
    unpaired_gold: usize,
    policy: UnpairedPolicy,
) -> MatchScores {
    let pair_count = triples.len();
    let denominator = match policy {
        UnpairedPolicy::Exclude => pair_count,
        UnpairedPolicy::ScoreAsZero => pair_count + unpaired_predicted + unpaired_gold,
    };
    let mean = |pick: fn(&MatchTriple) -> f64| -> Option<f64> {
        (denominator > 0).then(|| triples.iter().map(pick).sum::<f64>() / denominator as f64)
    };
    MatchScores {
        bleu: mean(|t| t.bleu),
        fuzzy: mean(|t| t.fuzzy),
        cosine: mean(|t| t.cosine).map(|c| c.max(0.0)),
        pair_count,
        unpaired_predicted,
        unpaired_gold,
    }
}

/// Macro (per-report) averages for one matching mode: means of per-report
/// precision and recall, skipping reports where the ratio is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroSums {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub reports: usize,
}

/// Per-report averaging alternative to the micro-averaged [`LinkScores`],
/// for aggregation-sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroLinkScores {
    pub em: MacroSums,
    pub fuzzy: MacroSums,
    pub em_fuzzy: MacroSums,
}

pub fn macro_link_scores<'a>(
    alignments: impl IntoIterator<Item = &'a Alignments>,
) -> Result<MacroLinkScores, MetricsError> {
    let mut reports = 0usize;
    let mut sums = [[0.0f64; 2]; 3];
    let mut counts = [[0usize; 2]; 3];
    for per_report in alignments {
        reports += 1;
        for (m, mode) in MatchMode::ALL.iter().enumerate() {
            let alignment = per_report.mode(*mode);
            if alignment.predicted_count() > 0 {
                sums[m][0] += alignment.pairs.len() as f64 / alignment.predicted_count() as f64;
                counts[m][0] += 1;
            }
            if alignment.gold_count() > 0 {
                sums[m][1] += alignment.pairs.len() as f64 / alignment.gold_count() as f64;
                counts[m][1] += 1;
            }
        }
    }
    if reports == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let pick = |m: usize| MacroSums {
        precision: (counts[m][0] > 0).then(|| sums[m][0] / counts[m][0] as f64),
        recall: (counts[m][1] > 0).then(|| sums[m][1] / counts[m][1] as f64),
        reports,
    };
    Ok(MacroLinkScores {
        em: pick(0),
        fuzzy: pick(1),
        em_fuzzy: pick(2),
    })
}

/// Score one mention pair: BLEU with the gold mention as sole reference,
/// fuzzy ratio, and embedding cosine.
pub fn mention_triple(
    pred: &str,
    gold: &str,
    embedder: &EmbeddingClient,
) -> Result<MatchTriple, crate::backends::BackendError> {
    let pred_vec = embedder.embed(pred)?;
    let gold_vec = embedder.embed(gold)?;
    let cosine = cosine_similarity(&pred_vec.values, &gold_vec.values).unwrap_or(0.0);
    Ok(MatchTriple {
        bleu: bleu(pred, &[gold.to_string()]),
        fuzzy: fuzzy_ratio(pred, gold),
        cosine,
    })
}
