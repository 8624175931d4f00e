use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use chan_core::dataset::{load_features, read_summaries, summary_file, synth_generate, SynthConfig};
use chan_core::evaluation::evaluate_dataset;
use chan_core::experiment::{check_dims, run_experiment, RunConfig};
use chan_core::model::{load_checkpoint, predict_summaries, save_checkpoint, summarize_video};
use chan_core::selfcheck::run_gradcheck_suite;
use chan_core::{kts_segment, ChanError, Dataset, GradcheckOptions, KtsConfig, Query, Summary};
use serde_json::json;

use crate::args::{EvaluateArgs, GenDataArgs, GradcheckArgs, SegmentArgs, SummarizeArgs, TrainArgs};
use crate::output::{create_dir, emit, read_json, write_json, Failure};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const TEST_SUMMARIES_FILE: &str = "test_summaries.json";

pub fn gen_data(a: GenDataArgs) -> Result<ExitCode, Failure> {
    let mut cfg: SynthConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    a.apply(&mut cfg);
    let dataset = synth_generate(&cfg)?;
    dataset.save(&a.out)?;
    let summary = json!({
        "dataset": a.out,
        "videos": dataset.videos.len(),
        "shots": dataset.videos.iter().map(|v| v.n_shots()).sum::<usize>(),
        "concepts": dataset.vocabulary.len(),
        "queries": dataset.queries.len(),
        "references": dataset.references.len(),
    });
    emit(&summary, None)?;
    Ok(ExitCode::SUCCESS)
}

pub fn segment(a: SegmentArgs) -> Result<ExitCode, Failure> {
    let mut cfg: KtsConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => KtsConfig::default(),
    };
    a.kts.apply(&mut cfg);
    let features = load_features(&a.features)?;
    let boundaries = kts_segment(&features, &cfg)?;
    let result = json!({
        "n_shots": features.n_shots(),
        "change_points": boundaries.change_points(),
        "segment_lengths": boundaries.lengths(),
        "config": cfg,
    });
    emit(&result, a.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

pub fn train(a: TrainArgs) -> Result<ExitCode, Failure> {
    let mut cfg: RunConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => RunConfig::default(),
    };
    a.apply(&mut cfg);
    let dataset_dir = cfg.dataset.clone().ok_or_else(|| Failure::usage("--dataset is required (flag or config)"))?;
    let out = cfg.out.clone().ok_or_else(|| Failure::usage("--out is required (flag or config)"))?;
    cfg.model_config().validate()?;
    let dataset = Dataset::load(&dataset_dir)?;
    check_dims(&cfg.model, &dataset)?;

    create_dir(&out)?;
    write_json(&out.join(RUN_CONFIG_FILE), &cfg)?;
    let log_path = out.join(TRAIN_LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| ChanError::Io { path: log_path.clone(), source: e })?);
    let mut log_error = None;
    let run = run_experiment(&cfg, &dataset, |rec| {
        log::debug!("epoch {} step {} loss {:.6}", rec.epoch, rec.step, rec.loss);
        let line = serde_json::to_string(rec).expect("plain data serializes");
        if let Err(e) = writeln!(log, "{line}") {
            log_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_error.or_else(|| log.flush().err()) {
        return Err(ChanError::Io { path: log_path, source: e }.into());
    }
    for e in &run.report.epochs {
        log::info!("epoch {}: loss {:.4}, val F1 {:?}", e.epoch, e.mean_loss, e.val_f1);
    }

    let metadata = serde_json::to_value(&cfg).expect("plain data serializes");
    save_checkpoint(out.join(CHECKPOINT_FILE), run.model(), Some(metadata))?;
    write_json(&out.join(METRICS_FILE), &run.report)?;
    let (test_summaries, _) = predict_summaries(run.model(), &dataset, &run.boundaries, &run.report.split.test)?;
    write_json(&out.join(TEST_SUMMARIES_FILE), &summary_file(&test_summaries, None, &dataset.vocabulary))?;

    let summary = json!({
        "out": out,
        "fold": cfg.fold,
        "test_videos": run.report.split.test.iter().map(|&v| &dataset.videos[v].id).collect::<Vec<_>>(),
        "epochs_run": run.report.epochs.len(),
        "best_epoch": run.report.best_epoch,
        "best_val_f1": run.report.best_val_f1,
        "test": run.report.test.average,
    });
    emit(&summary, None)?;
    Ok(ExitCode::SUCCESS)
}

pub fn summarize(a: SummarizeArgs) -> Result<ExitCode, Failure> {
    let (mut model, manifest) = load_checkpoint(&a.checkpoint)?;
    let kts = manifest
        .metadata
        .and_then(|m| serde_json::from_value::<RunConfig>(m).ok())
        .map_or_else(KtsConfig::default, |c| c.train.kts);
    if let Some(policy) = a.policy.policy() {
        model.config.selection = policy;
        model.config.validate()?;
    }
    let dataset = Dataset::load(&a.dataset)?;
    check_dims(&model.config, &dataset)?;

    let videos: Vec<usize> = match &a.video {
        Some(id) => vec![dataset
            .videos
            .iter()
            .position(|v| &v.id == id)
            .ok_or_else(|| ChanError::Validation(format!("no video `{id}` in the dataset")))?],
        None => (0..dataset.videos.len()).collect(),
    };
    let queries: Vec<Query> = match &a.query {
        Some(q) => vec![Query::parse(q, &dataset.vocabulary)?],
        None => dataset.queries.clone(),
    };
    let mut summaries = Vec::new();
    let mut scores = Vec::new();
    for v in videos {
        let boundaries = kts_segment(&dataset.videos[v].features, &kts)?;
        for (q, res) in queries.iter().zip(summarize_video(&model, &dataset, v, &boundaries, &queries)?) {
            summaries.push(Summary { video_id: dataset.videos[v].id.clone(), query: *q, shots: res.selected });
            scores.push(res.scores);
        }
    }
    emit(&summary_file(&summaries, Some(&scores), &dataset.vocabulary), a.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(a: EvaluateArgs) -> Result<ExitCode, Failure> {
    let dataset = Dataset::load(&a.dataset)?;
    let candidates = read_summaries(&a.summaries, &dataset.vocabulary)?;
    let mut references = match &a.references {
        Some(path) => read_summaries(path, &dataset.vocabulary)?,
        None => dataset.references.clone(),
    };
    if !a.all_videos {
        let present: HashSet<&str> = candidates.iter().map(|s| s.video_id.as_str()).collect();
        references.retain(|r| present.contains(r.video_id.as_str()));
    }
    let table = evaluate_dataset(&candidates, &references, &dataset.annotations_map())?;
    let result = json!({
        "videos": table.videos,
        "average": table.average,
        "table": table.to_text(),
    });
    emit(&result, a.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(a: GradcheckArgs) -> Result<ExitCode, Failure> {
    let mut opts = GradcheckOptions { seed: a.seed, ..GradcheckOptions::default() };
    if let Some(t) = a.tolerance {
        opts.tolerance = t;
    }
    if let Some(s) = a.step {
        opts.step = s;
    }
    if let Some(k) = a.max_coords {
        opts.max_coords = k;
    }
    let report = run_gradcheck_suite(a.seed, &opts)?;
    emit(&report, a.out.as_ref())?;
    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        let worst: Vec<&str> = report.cases.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure { kind: "gradcheck_failed", message: format!("gradient mismatch in {}", worst.join(", ")), code: 1 })
    }
}
