//! The five pipeline commands. Each is re-runnable, deterministic for a
//! fixed seed, and writes only under the configured output directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Duration;

use warntriage_core::checkpoint;
use warntriage_core::dataset::{
    identity_hex, read_jsonl, write_jsonl, ActionableRow, DatasetEntry, FalseWarningRow,
    RankedRow, ACTIONABLE_SCHEMA, DATASET_SCHEMA, FALSE_WARNINGS_SCHEMA, RANKED_SCHEMA,
};
use warntriage_core::encoder::{Encoder, HashingEncoder};
use warntriage_core::eval::{build_samples, EvalSample, MetricsReport};
use warntriage_core::features::feature_bundle;
use warntriage_core::labeler::weak_label;
use warntriage_core::miner::{
    apply_two_year_rule, build_commit_graph, mine_graph, LiveRunner, LiveRunnerConfig,
    ReplayRunner, ToolRunner, WarningCache,
};
use warntriage_core::reranker::{
    finetune_train, init_params, predict, ranking_score, warmup_train, ClassLabel, ModelParams,
};
use warntriage_core::DefaultScalar;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::source::CommitSource;

pub fn actionable_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("actionable.jsonl")
}

pub fn false_warnings_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("false_warnings.jsonl")
}

pub fn dataset_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("dataset.jsonl")
}

pub fn checkpoint_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("checkpoint.json")
}

pub fn ranked_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("ranked.jsonl")
}

pub fn metrics_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("metrics.json")
}

pub fn recall_curve_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("recall_curve.csv")
}

fn open_artifact(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Artifact(format!("missing artifact {}: {e}", path.display())))
}

fn create_output(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::DataAccess(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::DataAccess(format!("cannot write {}: {e}", path.display())))
}

fn commit_source(config: &PipelineConfig) -> Result<CommitSource, CliError> {
    if let Some(repo) = &config.repo {
        Ok(CommitSource::Git(repo.clone()))
    } else if let Some(dir) = &config.commit_info_dir {
        Ok(CommitSource::Dir(dir.clone()))
    } else {
        Err(CliError::Config(
            "label needs `repo` or `commit_info_dir` to read commit messages and diffs".into(),
        ))
    }
}

/// Mine actionable warnings and long-lived false warnings from the
/// configured repository.
pub fn cmd_mine(config: &PipelineConfig) -> Result<(), CliError> {
    let repo = config
        .repo
        .as_ref()
        .ok_or_else(|| CliError::Config("mine needs `repo` (the commit graph source)".into()))?;

    let runner: Box<dyn ToolRunner> = if let Some(dir) = &config.replay_dir {
        Box::new(ReplayRunner::new(dir)?)
    } else {
        let mut tool_cmds = Vec::new();
        if !config.infer_cmd.trim().is_empty() {
            tool_cmds.push(("infer".to_string(), config.infer_cmd.clone()));
        }
        if !config.flawfinder_cmd.trim().is_empty() {
            tool_cmds.push(("flawfinder".to_string(), config.flawfinder_cmd.clone()));
        }
        if tool_cmds.is_empty() {
            return Err(CliError::Config(
                "mine needs `replay_dir`, or `infer_cmd`/`flawfinder_cmd` for a live run".into(),
            ));
        }
        Box::new(LiveRunner::new(LiveRunnerConfig {
            repo: repo.clone(),
            build_cmd: config.build_cmd.clone(),
            tool_cmds,
            timeout: Duration::from_secs_f64(config.build_timeout_secs),
        }))
    };

    let graph = build_commit_graph(repo, &config.branch_tips)?;
    let cache = WarningCache::new();
    let outcome = mine_graph(&graph, runner.as_ref(), &cache)?;

    let meta: BTreeMap<u64, (i64, String)> = outcome
        .survivors
        .iter()
        .map(|s| (s.warning.identity, (s.first_seen, s.head.clone())))
        .collect();
    let pairs: Vec<_> = outcome
        .survivors
        .into_iter()
        .map(|s| (s.warning, s.first_seen))
        .collect();
    let (false_warnings, excluded) =
        apply_two_year_rule(pairs, outcome.head_time, config.two_year_days);

    let mut false_rows: Vec<FalseWarningRow> = false_warnings
        .into_iter()
        .map(|warning| {
            let (first_seen, head) = meta[&warning.identity].clone();
            FalseWarningRow { warning, first_seen, head }
        })
        .collect();
    false_rows.sort_by_key(|r| r.warning.identity);

    let actionable_rows: Vec<ActionableRow> =
        outcome.actionable.into_iter().map(ActionableRow::from).collect();

    write_jsonl(create_output(&actionable_path(config))?, ACTIONABLE_SCHEMA, &actionable_rows)?;
    write_jsonl(create_output(&false_warnings_path(config))?, FALSE_WARNINGS_SCHEMA, &false_rows)?;
    println!(
        "mined {} actionable, {} false warnings ({} young survivors excluded) from {} commits",
        actionable_rows.len(),
        false_rows.len(),
        excluded.len(),
        graph.len()
    );
    Ok(())
}

/// Weak-label mined actionable warnings and assemble the training dataset.
pub fn cmd_label(config: &PipelineConfig) -> Result<(), CliError> {
    let actionable: Vec<ActionableRow> =
        read_jsonl(open_artifact(&actionable_path(config))?, ACTIONABLE_SCHEMA)?;
    let false_rows: Vec<FalseWarningRow> =
        read_jsonl(open_artifact(&false_warnings_path(config))?, FALSE_WARNINGS_SCHEMA)?;
    let source = commit_source(config)?;

    let mut entries: Vec<DatasetEntry> = Vec::with_capacity(actionable.len() + false_rows.len());
    for row in actionable {
        let message = source.message(&row.fix_commit)?;
        let diff_text = source.diff(&row.last_present, &row.fix_commit)?;
        let hunks = warntriage_core::diff::parse_unified_diff(&diff_text);
        let window = source
            .file_at(&row.fix_commit, &row.warning.file)
            .and_then(|text| {
                warntriage_core::features::procedure_span(&text, &row.warning.procedure)
            });
        let label = weak_label(&row.warning, &message, &hunks, window);
        let bundle_source = source.file_at(&row.last_present, &row.warning.file);
        let bundle = feature_bundle(&row.warning, bundle_source.as_deref());
        entries.push(DatasetEntry {
            warning: row.warning,
            label: label.aggregate.into(),
            cm: label.cm,
            cc: label.cc,
            fix_commit: Some(row.fix_commit),
            bundle,
        });
    }
    for row in &false_rows {
        let bundle_source = source.file_at(&row.head, &row.warning.file);
        let bundle = feature_bundle(&row.warning, bundle_source.as_deref());
        entries.push(DatasetEntry {
            warning: row.warning.clone(),
            label: ClassLabel::FalseWarning,
            cm: 0,
            cc: 0,
            fix_commit: None,
            bundle,
        });
    }

    write_jsonl(create_output(&dataset_path(config))?, DATASET_SCHEMA, &entries)?;
    print_label_summary(&entries);
    Ok(())
}

fn print_label_summary(entries: &[DatasetEntry]) {
    let actionable: Vec<&DatasetEntry> =
        entries.iter().filter(|e| e.label != ClassLabel::FalseWarning).collect();
    let cm_count = |v: u8| actionable.iter().filter(|e| e.cm == v).count();
    let cc_count = |v: u8| actionable.iter().filter(|e| e.cc == v).count();
    let label_count =
        |l: ClassLabel| entries.iter().filter(|e| e.label == l).count();
    println!("commit message matching rule:");
    println!("  warning type keyword     {:>8}", cm_count(3));
    println!("  warning context keyword  {:>8}", cm_count(2));
    println!("  common keyword           {:>8}", cm_count(1));
    println!("  no matching              {:>8}", cm_count(0));
    println!("code change matching rule:");
    println!("  fix pattern              {:>8}", cc_count(2));
    println!("  scope pattern            {:>8}", cc_count(1));
    println!("  no matching              {:>8}", cc_count(0));
    println!("aggregated label:");
    println!("  VTB                      {:>8}", label_count(ClassLabel::VTB));
    println!("  LTB                      {:>8}", label_count(ClassLabel::LTB));
    println!("  UTB                      {:>8}", label_count(ClassLabel::UTB));
    println!("  False Warning            {:>8}", label_count(ClassLabel::FalseWarning));
}

fn read_dataset(config: &PipelineConfig) -> Result<Vec<DatasetEntry>, CliError> {
    let entries: Vec<DatasetEntry> =
        read_jsonl(open_artifact(&dataset_path(config))?, DATASET_SCHEMA)?;
    for (i, entry) in entries.iter().enumerate() {
        entry.validate().map_err(|msg| {
            CliError::Artifact(format!("dataset entry {} is inconsistent: {msg}", i + 1))
        })?;
    }
    Ok(entries)
}

/// Train the two-stage model on the labeled dataset and write a checkpoint.
pub fn cmd_train(config: &PipelineConfig) -> Result<(), CliError> {
    let entries = read_dataset(config)?;
    let encoder = HashingEncoder::new(config.encoder_dim);
    let init = init_params::<DefaultScalar>(
        config.encoder_dim,
        config.hidden,
        config.seed,
        config.hyperparams(),
    );

    let warm_data: Vec<_> = entries
        .iter()
        .map(|e| (e.bundle.clone(), e.label.is_actionable()))
        .collect();
    let warm = warmup_train(&encoder, &warm_data, init)?;
    println!("warm-up done: {} examples", warm_data.len());

    let fine_data: Vec<_> = entries
        .iter()
        .map(|e| (e.bundle.clone(), e.label, e.cm + e.cc))
        .collect();
    let params = finetune_train(&encoder, &fine_data, &warm)?;
    let oversampled = warntriage_core::reranker::oversample_indices(
        &entries.iter().map(|e| e.label).collect::<Vec<_>>(),
        config.oversample,
    )
    .len();
    println!("fine-tune done: {} examples after oversampling", oversampled);

    let path = checkpoint_path(config);
    checkpoint::save(&params, &path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}

fn load_model(config: &PipelineConfig) -> Result<(ModelParams<DefaultScalar>, HashingEncoder), CliError> {
    let params = checkpoint::load::<DefaultScalar>(&checkpoint_path(config))?;
    if params.dim != config.encoder_dim {
        return Err(CliError::Artifact(format!(
            "dimension mismatch: checkpoint encodes dim {}, config expects encoder_dim {}",
            params.dim, config.encoder_dim
        )));
    }
    let encoder = HashingEncoder::new(params.dim);
    Ok((params, encoder))
}

/// Rank every dataset warning by the model's score and write the ordered
/// list.
pub fn cmd_rank(config: &PipelineConfig) -> Result<(), CliError> {
    let entries = read_dataset(config)?;
    let (params, encoder) = load_model(config)?;

    let ranked = warntriage_core::reranker::rank(
        &params,
        &encoder,
        entries.iter().map(|e| (e.warning.identity, &e.bundle)),
    );
    let meta: BTreeMap<u64, (&str, u32, warntriage_core::warning::WarningType)> = entries
        .iter()
        .map(|e| (e.warning.identity, (e.warning.file.as_str(), e.warning.line, e.warning.wtype)))
        .collect();
    let rows: Vec<RankedRow> = ranked
        .iter()
        .map(|r| {
            let (file, line, wtype) = meta[&r.identity];
            RankedRow {
                identity: identity_hex(r.identity),
                score: r.score,
                predicted: r.predicted,
                confidence: r.confidence,
                file: file.to_string(),
                line,
                wtype,
            }
        })
        .collect();
    write_jsonl(create_output(&ranked_path(config))?, RANKED_SCHEMA, &rows)?;
    println!("ranked {} warnings; top of the list:", rows.len());
    for row in rows.iter().take(10) {
        println!(
            "  {:>7.3}  {:<12} {}:{}",
            row.score,
            row.predicted.to_string(),
            row.file,
            row.line
        );
    }
    Ok(())
}

/// Ranking score per identity (first occurrence wins for duplicates).
pub fn score_entries(
    params: &ModelParams<DefaultScalar>,
    encoder: &dyn Encoder<DefaultScalar>,
    entries: &[DatasetEntry],
) -> BTreeMap<u64, f64> {
    let mut scores = BTreeMap::new();
    for e in entries {
        scores.entry(e.warning.identity).or_insert_with(|| {
            ranking_score(&predict(params, encoder, &e.bundle))
        });
    }
    scores
}

/// Deduplicated (identity, awhb) pool in dataset order.
pub fn eval_pool(entries: &[DatasetEntry]) -> Vec<(u64, bool)> {
    let mut seen = std::collections::HashSet::new();
    entries
        .iter()
        .filter(|e| seen.insert(e.warning.identity))
        .map(|e| (e.warning.identity, e.is_awhb()))
        .collect()
}

/// Order each sample's members by model score (descending, ties by
/// identity) and report per-position relevance.
pub fn model_relevance_lists(
    samples: &[EvalSample],
    scores: &BTreeMap<u64, f64>,
) -> Vec<Vec<bool>> {
    samples
        .iter()
        .map(|sample| {
            let mut members = sample.members.clone();
            members.sort_by(|a, b| {
                scores[&b.0]
                    .partial_cmp(&scores[&a.0])
                    .expect("scores are finite")
                    .then(a.0.cmp(&b.0))
            });
            members.into_iter().map(|(_, awhb)| awhb).collect()
        })
        .collect()
}

/// Relevance in presentation order: the shuffled random-ranking baseline.
pub fn shuffled_relevance_lists(samples: &[EvalSample]) -> Vec<Vec<bool>> {
    samples
        .iter()
        .map(|s| s.members.iter().map(|(_, awhb)| *awhb).collect())
        .collect()
}

fn graded_gain_lists(
    samples: &[EvalSample],
    scores: &BTreeMap<u64, f64>,
    grades: &BTreeMap<u64, f64>,
) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|sample| {
            let mut members = sample.members.clone();
            members.sort_by(|a, b| {
                scores[&b.0]
                    .partial_cmp(&scores[&a.0])
                    .expect("scores are finite")
                    .then(a.0.cmp(&b.0))
            });
            members.into_iter().map(|(id, _)| grades[&id]).collect()
        })
        .collect()
}

#[derive(serde::Serialize)]
struct MetricsFile<'a> {
    schema: &'a str,
    version: u32,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

fn write_metrics(
    config: &PipelineConfig,
    report: &MetricsReport,
    relevance: &[Vec<bool>],
) -> Result<(), CliError> {
    let file = MetricsFile { schema: "warntriage/metrics", version: 1, report };
    let json = serde_json::to_string_pretty(&file).expect("metrics serialize");
    std::io::Write::write_all(
        &mut create_output(&metrics_path(config))?,
        format!("{json}\n").as_bytes(),
    )
    .map_err(|e| CliError::DataAccess(e.to_string()))?;

    let mut csv = String::from("percent,recall\n");
    for p in 1..=100u32 {
        let mean: f64 = relevance
            .iter()
            .map(|rel| warntriage_core::eval::recall_at_percent::<f64>(rel, p))
            .sum::<f64>()
            / relevance.len().max(1) as f64;
        csv.push_str(&format!("{p},{mean}\n"));
    }
    std::io::Write::write_all(&mut create_output(&recall_curve_path(config))?, csv.as_bytes())
        .map_err(|e| CliError::DataAccess(e.to_string()))?;
    Ok(())
}

/// Evaluate the trained model on sampled test lists, or score an existing
/// ranked list when one is given.
pub fn cmd_eval(config: &PipelineConfig, ranked_file: Option<&Path>) -> Result<(), CliError> {
    let entries = read_dataset(config)?;
    let awhb_by_id: BTreeMap<u64, bool> = entries
        .iter()
        .map(|e| (e.warning.identity, e.is_awhb()))
        .collect();

    let relevance: Vec<Vec<bool>>;
    let mut gains: Option<Vec<Vec<f64>>> = None;

    if let Some(path) = ranked_file {
        let rows: Vec<RankedRow> = read_jsonl(open_artifact(path)?, RANKED_SCHEMA)?;
        let list: Vec<bool> = rows
            .iter()
            .map(|row| {
                let id = u64::from_str_radix(&row.identity, 16).map_err(|_| {
                    CliError::Artifact(format!("bad identity {:?} in ranked list", row.identity))
                })?;
                Ok(*awhb_by_id.get(&id).unwrap_or(&false))
            })
            .collect::<Result<_, CliError>>()?;
        relevance = vec![list];
    } else {
        let (params, encoder) = load_model(config)?;
        let scores = score_entries(&params, &encoder, &entries);
        let pool = eval_pool(&entries);
        let samples = build_samples(
            &pool,
            config.eval_samples,
            config.eval_sample_size,
            config.eval_min_awhb,
            config.seed,
        )?;
        relevance = model_relevance_lists(&samples, &scores);
        if config.graded_gains {
            let grades: BTreeMap<u64, f64> = entries
                .iter()
                .map(|e| {
                    let g = match e.label {
                        ClassLabel::VTB => 3.0,
                        ClassLabel::LTB => 2.0,
                        _ => 0.0,
                    };
                    (e.warning.identity, g)
                })
                .collect();
            gains = Some(graded_gain_lists(&samples, &scores, &grades));
        }
    }

    let report = MetricsReport::from_samples(
        &relevance,
        gains.as_deref(),
        &config.ndcg_ks,
        &config.recall_percents,
    );
    write_metrics(config, &report, &relevance)?;
    print!("{}", report.to_table());
    println!("metrics written to {}", metrics_path(config).display());
    Ok(())
}
