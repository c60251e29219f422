//! Command-line entry point for the symptom coding pipeline.

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use sympcoder::analysis::{
    exhibit, export_groups_csv, export_groups_json, export_groups_text, export_link_csv,
    load_records, score_groups, subset_compare, symptom_breakdown, write_records,
};
use sympcoder::config::{BackendConfig, RunConfig, StrategyChoice};
use sympcoder::corpus::{
    build_subset, compute_stats, ingest_vaers, load_dataset, save_dataset, symptom_frequencies,
    SubsetSelector,
};
use sympcoder::metrics::UnpairedPolicy;
use sympcoder::pipeline::{self, PipelineError, RunControl};

#[derive(Parser)]
#[command(
    name = "sympcoder",
    version,
    about = "Code medical symptoms from adverse-event reports with LLMs and evaluate the results"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dataset from raw VAERS distribution files.
    Ingest {
        /// CSV with VAERS_ID and SYMPTOM_TEXT columns.
        #[arg(long)]
        data: PathBuf,
        /// CSV with VAERS_ID and SYMPTOM1..SYMPTOM5 columns.
        #[arg(long)]
        symptoms: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "vaers")]
        name: String,
    },
    /// Print dataset statistics.
    Stats {
        dataset: PathBuf,
        /// Results file adding the extracted-symptom column.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Emit machine-readable JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Build a frequency-based subset of a dataset.
    Subset {
        dataset: PathBuf,
        /// Which end of the frequency ranking to keep.
        #[arg(long, value_parser = ["top", "bottom"])]
        select: String,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline: prompt, complete, distill, score.
    Run(RunArgs),
    /// Re-distill cached completions referenced by a results file.
    Distill {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        records: PathBuf,
        /// Output path; defaults to rewriting the input file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-score a results file against its dataset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export score tables, subset comparisons, breakdowns, and exhibits.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<StrategyChoice>,
    /// Backend kind override: mock | oracle (http requires a config file).
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Process only the first N reports.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results files (one per model/strategy run is fine; records carry
    /// their own tags).
    #[arg(long, required = true, num_args = 1..)]
    records: Vec<PathBuf>,
    #[arg(long, value_parser = ["text", "csv", "json", "link-csv"], default_value = "text")]
    format: String,
    /// Write to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset backing exhibits and breakdowns.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Render a side-by-side exhibit for this report id.
    #[arg(long)]
    exhibit: Option<String>,
    /// Comma-separated standard terms for a mention-variant breakdown.
    #[arg(long)]
    breakdown: Option<String>,
    /// Common-subset dataset file for grouped comparison.
    #[arg(long)]
    common: Option<PathBuf>,
    /// Rare-subset dataset file for grouped comparison.
    #[arg(long)]
    rare: Option<PathBuf>,
    /// Count unpaired mentions as zero-score samples in MATCH means.
    #[arg(long)]
    score_unpaired_as_zero: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(&error);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(error.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Ingest {
            data,
            symptoms,
            out,
            name,
        } => {
            let dataset = ingest_vaers(&data, &symptoms, &name)?;
            save_dataset(&dataset, &out)?;
            println!("wrote {} reports to {}", dataset.len(), out.display());
            Ok(())
        }
        Command::Stats {
            dataset,
            results,
            json,
        } => {
            let ds = load_dataset(&dataset)?;
            let extracted = match results {
                Some(path) => {
                    let records = load_records(&path)?;
                    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                    for record in &records {
                        let entry = counts.entry(record.id.clone()).or_insert(0);
                        *entry = (*entry).max(record.links.len());
                    }
                    Some(counts)
                }
                None => None,
            };
            let stats = compute_stats(&ds, extracted.as_ref())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            } else {
                print!("{}", stats.render_table(&ds.name));
            }
            Ok(())
        }
        Command::Subset {
            dataset,
            select,
            k,
            out,
        } => {
            let ds = load_dataset(&dataset)?;
            let selector = if select == "top" {
                SubsetSelector::TopK
            } else {
                SubsetSelector::BottomK
            };
            let subset = build_subset(&ds, selector, k)?;
            save_dataset(&subset, &out)?;
            let freqs = symptom_frequencies(&ds)?;
            println!(
                "selected {k} of {} distinct terms; kept {} of {} reports -> {}",
                freqs.len(),
                subset.len(),
                ds.len(),
                out.display()
            );
            Ok(())
        }
        Command::Run(args) => cmd_run(args),
        Command::Distill {
            config,
            records,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let dataset = load_dataset(&config.dataset)?;
            let completion = pipeline::build_completion_client(&config, &dataset)?;
            let embedder = pipeline::build_embedding_client(&config)?;
            let loaded = load_records(&records)?;
            let redistilled = pipeline::redistill_records(
                &loaded,
                &dataset,
                &completion,
                config.fuzzy_threshold,
                &embedder,
            )?;
            let target = out.unwrap_or(records);
            write_records(&target, &redistilled)?;
            println!("re-distilled {} records -> {}", redistilled.len(), target.display());
            Ok(())
        }
        Command::Eval {
            config,
            records,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let dataset = load_dataset(&config.dataset)?;
            let embedder = pipeline::build_embedding_client(&config)?;
            let loaded = load_records(&records)?;
            let rescored =
                pipeline::rescore_records(&loaded, &dataset, config.fuzzy_threshold, &embedder)?;
            let target = out.unwrap_or(records);
            write_records(&target, &rescored)?;
            let groups = score_groups(&rescored, config.unpaired_policy)?;
            print!("{}", export_groups_text(&groups));
            Ok(())
        }
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), PipelineError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let dataset = args.dataset.clone().ok_or_else(|| {
                sympcoder::config::ConfigError::Invalid(
                    "either --config or --dataset is required".into(),
                )
            })?;
            RunConfig::offline_defaults(dataset)
        }
    };
    if let Some(dataset) = args.dataset {
        config.dataset = dataset;
    }
    if let Some(strategy) = args.strategy {
        config.strategy = strategy;
    }
    if let Some(kind) = args.backend {
        config.backend = match kind.as_str() {
            "mock" => BackendConfig::Mock {
                text: "{}".into(),
            },
            "oracle" => BackendConfig::Oracle {
                noise: Default::default(),
            },
            "http" => match config.backend {
                http @ BackendConfig::Http { .. } => http,
                _ => {
                    return Err(sympcoder::config::ConfigError::Invalid(
                        "--backend http requires an http backend in the config file".into(),
                    )
                    .into())
                }
            },
            other => {
                return Err(sympcoder::config::ConfigError::Invalid(format!(
                    "unknown backend '{other}' (http|mock|oracle)"
                ))
                .into())
            }
        };
    }
    if let Some(model) = args.model {
        if let BackendConfig::Http { model: m, .. } = &mut config.backend {
            *m = model;
        }
    }
    if let Some(base_url) = args.base_url {
        if let BackendConfig::Http { base_url: b, .. } = &mut config.backend {
            *b = base_url;
        }
    }
    if let Some(threshold) = args.threshold {
        config.fuzzy_threshold = threshold;
    }
    if let Some(concurrency) = args.concurrency {
        config.concurrency = concurrency;
    }
    if let Some(cache_dir) = args.cache_dir {
        config.cache_dir = cache_dir;
    }
    if let Some(out_dir) = args.out_dir {
        config.output_dir = out_dir;
    }
    if let Some(limit) = args.limit {
        config.limit = Some(limit);
    }

    let outcome = pipeline::run(&config, &RunControl::unlimited())?;
    println!(
        "processed {} records ({} malformed) -> {}",
        outcome.processed,
        outcome.malformed,
        outcome.results_path.display()
    );
    print!("{}", export_groups_text(&outcome.groups));
    println!("scores written to {}", outcome.scores_path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), PipelineError> {
    let mut records = Vec::new();
    for path in &args.records {
        records.extend(load_records(path)?);
    }
    let policy = if args.score_unpaired_as_zero {
        UnpairedPolicy::ScoreAsZero
    } else {
        UnpairedPolicy::Exclude
    };

    let mut output = String::new();

    if let Some(report_id) = &args.exhibit {
        let dataset_path = args.dataset.as_ref().ok_or_else(|| {
            sympcoder::config::ConfigError::Invalid("--exhibit requires --dataset".into())
        })?;
        let dataset = load_dataset(dataset_path)?;
        let doc = exhibit(report_id, &records, &dataset)?;
        output.push_str(&doc.render_text());
    } else if let Some(terms) = &args.breakdown {
        let dataset_path = args.dataset.as_ref().ok_or_else(|| {
            sympcoder::config::ConfigError::Invalid("--breakdown requires --dataset".into())
        })?;
        let dataset = load_dataset(dataset_path)?;
        let term_list: Vec<String> = terms.split(',').map(|t| t.trim().to_string()).collect();
        let breakdowns = symptom_breakdown(&records, &dataset, &term_list)?;
        output.push_str(
            &serde_json::to_string_pretty(&breakdowns).expect("breakdown serialize"),
        );
        output.push('\n');
    } else if args.common.is_some() || args.rare.is_some() {
        let mut subsets = Vec::new();
        let common = args.common.as_ref().map(load_dataset).transpose()?;
        let rare = args.rare.as_ref().map(load_dataset).transpose()?;
        if let Some(ds) = &common {
            subsets.push(("common", ds));
        }
        if let Some(ds) = &rare {
            subsets.push(("rare", ds));
        }
        let comparison = subset_compare(&records, &subsets, policy)?;
        output.push_str(&serde_json::to_string_pretty(&comparison).expect("comparison serialize"));
        output.push('\n');
    } else {
        let groups = score_groups(&records, policy)?;
        match args.format.as_str() {
            "csv" => output.push_str(&export_groups_csv(&groups)),
            "json" => output.push_str(&export_groups_json(&groups)),
            "link-csv" => {
                for group in &groups {
                    output.push_str(&format!("# {} {}\n", group.model, group.strategy.label()));
                    output.push_str(&export_link_csv(&group.link));
                }
            }
            _ => output.push_str(&export_groups_text(&groups)),
        }
    }

    match args.out {
        Some(path) => std::fs::write(&path, output).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => print!("{output}"),
    }
    Ok(())
}
