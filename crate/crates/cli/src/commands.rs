use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use streamctl_core::reason::{
    reward_surface_sweep, train_router, unit_grid, RoutingPolicy, RunLog, SurfaceRow, TrainMode,
};
use streamctl_core::respond::{head_accuracy, train_readiness_head, ReadinessHead};
use streamctl_core::seed::{derive_seed, tag};
use streamctl_core::sim::io::{
    read_queries_jsonl, read_stream_jsonl, write_queries_jsonl, write_stream_jsonl,
    write_trace_jsonl,
};
use streamctl_core::sim::{
    deletion_experiment, generate_queries, generate_stream, memory_fidelity,
    readiness_training_set, run_pipeline, ActionTrace, DeletionSummary, PipelineMetrics,
    PipelineSpec, Query, RouteMode, SyntheticRoutingEnv, SyntheticStreamConfig,
    ROUTING_FEATURE_DIM,
};
use streamctl_core::{replay_stream, Frame};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const RUNLOG_HEADER: [&str; 11] = [
    "step",
    "rho_ema",
    "rho_raw",
    "mean_reward",
    "accuracy",
    "escalate_count",
    "answer_count",
    "mean_naive_reward",
    "mean_cost",
    "loss",
    "kl",
];

pub const SURFACE_HEADER: [&str; 6] = ["rho", "e", "c", "delta_esc", "delta_ans", "r"];

pub const SWEEP_METRICS: [&str; 9] = [
    "final_escalation_ratio",
    "final_rho_ema",
    "final_mean_reward",
    "train_accuracy",
    "eval_accuracy",
    "eval_escalation_ratio",
    "eval_mean_cost",
    "drop_ratio",
    "fidelity",
];

pub const SWEEP_AXES: [&str; 5] = ["tau_near", "tau_hist", "window", "eta", "gamma"];

/// Steps averaged for the "final" training metrics.
pub const TAIL: usize = 50;

/// Episode 0 trains the readiness head; episode 1 is held out for evaluation.
pub const TRAIN_EPISODE: u64 = 0;
pub const EVAL_EPISODE: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub routing: RoutingPolicy,
    pub readiness: ReadinessHead,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub stream: Vec<Frame>,
    pub queries: Vec<Query>,
}

pub fn episode(config: &RunConfig, index: u64) -> Result<Episode> {
    let stream_cfg = SyntheticStreamConfig {
        seed: derive_seed(config.seed, &[tag::STREAM, index]),
        ..config.environment.stream
    };
    let stream = generate_stream(&stream_cfg)?;
    let queries = generate_queries(
        &config.environment.queries,
        stream.len(),
        derive_seed(config.seed, &[tag::QUERIES, index]),
    )?;
    Ok(Episode { stream, queries })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    finish(w, path)
}

pub fn read_policy(path: &Path) -> Result<PolicyFile> {
    let file: PolicyFile = serde_json::from_reader(open(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    file.routing.validate()?;
    if file.routing.dim() != ROUTING_FEATURE_DIM {
        return Err(CliError::Data(format!(
            "{}: routing policy has dimension {}, expected {ROUTING_FEATURE_DIM}",
            path.display(),
            file.routing.dim()
        )));
    }
    Ok(file)
}

/// Fidelity the training environment assumes: that of the training
/// episode's final memory under the configured policy.
pub fn environment_fidelity(config: &RunConfig, episode: &Episode) -> Result<f64> {
    Ok(memory_fidelity(&replay_stream(
        &episode.stream,
        &config.memory,
    )?))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: RunLog,
    pub policy: PolicyFile,
    pub readiness_accuracy: f64,
    pub warnings: Vec<String>,
}

pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let ep = episode(config, TRAIN_EPISODE)?;
    let fidelity = environment_fidelity(config, &ep)?;
    let env = SyntheticRoutingEnv::new(
        config.environment.queries.difficulty.clone(),
        config.environment.queries.feature_noise,
        config.environment.oracle,
        fidelity,
        derive_seed(config.seed, &[tag::ENV_BATCH]),
    )?;
    let mut routing = RoutingPolicy::zeros(ROUTING_FEATURE_DIM);
    let log = train_router(&env, &mut routing, &config.band, &config.trainer_config())?;

    let examples = readiness_training_set(&ep.stream, &ep.queries, &config.memory)?;
    let trained = train_readiness_head(
        &examples,
        config.readiness.epochs,
        config.readiness.learning_rate,
        derive_seed(config.seed, &[tag::INIT]),
    )?;
    let readiness_accuracy = head_accuracy(&trained.head, &examples)?;
    let mut warnings = trained.warnings;
    if log.truncated {
        warnings.push(format!(
            "environment exhausted after {} of {} steps",
            log.records.len(),
            config.trainer.steps
        ));
    }
    Ok(TrainOutcome {
        log,
        policy: PolicyFile {
            routing,
            readiness: trained.head,
        },
        readiness_accuracy,
        warnings,
    })
}

pub fn write_runlog_csv(path: &Path, log: &RunLog) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(RUNLOG_HEADER)?;
    for r in &log.records {
        w.write_record(&[
            r.step.to_string(),
            r.rho_ema.to_string(),
            r.rho_raw.to_string(),
            r.mean_reward.to_string(),
            r.accuracy.to_string(),
            r.escalate_count.to_string(),
            r.answer_count.to_string(),
            r.mean_naive_reward.to_string(),
            r.mean_cost.to_string(),
            r.loss.to_string(),
            r.kl.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_runlog_jsonl(path: &Path, log: &RunLog) -> Result<()> {
    let mut w = create(path)?;
    for r in &log.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub mode: TrainMode,
    pub steps: usize,
    pub truncated: bool,
    pub final_escalation_ratio: f64,
    pub final_rho_ema: f64,
    pub final_mean_reward: f64,
    pub final_accuracy: f64,
    pub readiness_accuracy: f64,
    pub theta: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    let outcome = train(config)?;
    let out = &config.out;
    write_runlog_csv(&out.join("runlog.csv"), &outcome.log)?;
    write_runlog_jsonl(&out.join("runlog.jsonl"), &outcome.log)?;
    write_json(&out.join("policy.json"), &outcome.policy)?;
    config.save(&out.join("config.toml"))?;
    let summary = TrainSummary {
        mode: config.mode(),
        steps: outcome.log.records.len(),
        truncated: outcome.log.truncated,
        final_escalation_ratio: outcome.log.tail_escalation_ratio(TAIL),
        final_rho_ema: outcome.log.tail_rho_ema(TAIL),
        final_mean_reward: outcome.log.tail_mean_reward(TAIL),
        final_accuracy: outcome.log.tail_accuracy(TAIL),
        readiness_accuracy: outcome.readiness_accuracy,
        theta: outcome.policy.routing.theta.clone(),
        warnings: outcome.warnings,
    };
    write_json(&out.join("train_summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub all_fast: PipelineMetrics,
    pub all_slow: PipelineMetrics,
    pub adaptive: PipelineMetrics,
}

fn pipeline_spec<'a>(
    config: &'a RunConfig,
    ep: &'a Episode,
    policy: &'a PolicyFile,
) -> PipelineSpec<'a> {
    PipelineSpec {
        stream: &ep.stream,
        queries: &ep.queries,
        memory_policy: &config.memory,
        readiness_head: &policy.readiness,
        routing_policy: &policy.routing,
        oracle: &config.environment.oracle,
        seed: derive_seed(config.seed, &[tag::PIPELINE]),
    }
}

/// The three route modes on one shared held-out episode.
pub fn evaluate(config: &RunConfig, policy: &PolicyFile) -> Result<EvalReport> {
    let ep = episode(config, EVAL_EPISODE)?;
    let spec = pipeline_spec(config, &ep, policy);
    let mut results: Vec<PipelineMetrics> = RouteMode::ALL
        .par_iter()
        .map(|&mode| run_pipeline(&spec, mode).map(|(_, m)| m))
        .collect::<streamctl_core::Result<_>>()?;
    let adaptive = results.pop().expect("three modes");
    let all_slow = results.pop().expect("three modes");
    let all_fast = results.pop().expect("three modes");
    Ok(EvalReport {
        all_fast,
        all_slow,
        adaptive,
    })
}

pub fn cmd_eval(config: &RunConfig, policy_path: &Path) -> Result<EvalReport> {
    let policy = read_policy(policy_path)?;
    let report = evaluate(config, &policy)?;
    write_json(&config.out.join("metrics.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl std::str::FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("axis `{s}` must look like name=v1,v2")))?;
        let name = name.trim().to_string();
        if !SWEEP_AXES.contains(&name.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown sweep axis `{name}`; expected one of {}",
                SWEEP_AXES.join(", ")
            )));
        }
        let values = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("axis `{name}`: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(CliError::Usage(format!("axis `{name}` has no values")));
        }
        Ok(Axis { name, values })
    }
}

fn apply_axis(config: &mut RunConfig, name: &str, value: f64) -> Result<()> {
    match name {
        "tau_near" => config.memory.tau_near = value,
        "tau_hist" => config.memory.tau_hist = value,
        "window" => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(CliError::Usage(format!(
                    "window must be a positive integer, got {value}"
                )));
            }
            config.memory.window = value as usize;
        }
        "eta" => config.band.eta = value,
        "gamma" => config.band.gamma = value,
        other => return Err(CliError::Usage(format!("unknown sweep axis `{other}`"))),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: Vec<f64>,
    pub metrics: Vec<f64>,
}

/// Cartesian product of the axes, first axis slowest.
pub fn cells(axes: &[Axis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut c = prefix.clone();
                    c.push(v);
                    c
                })
            })
            .collect()
    })
}

fn sweep_cell(base: &RunConfig, axes: &[Axis], cell: &[f64]) -> Result<SweepRow> {
    let mut config = base.clone();
    for (axis, &v) in axes.iter().zip(cell) {
        apply_axis(&mut config, &axis.name, v)?;
    }
    config.validate()?;
    let trained = train(&config)?;
    let ep = episode(&config, EVAL_EPISODE)?;
    let (_, eval) = run_pipeline(
        &pipeline_spec(&config, &ep, &trained.policy),
        RouteMode::Policy,
    )?;
    let fidelity = memory_fidelity(&replay_stream(&ep.stream, &config.memory)?);
    let log = &trained.log;
    Ok(SweepRow {
        cell: cell.to_vec(),
        metrics: vec![
            log.tail_escalation_ratio(TAIL),
            log.tail_rho_ema(TAIL),
            log.tail_mean_reward(TAIL),
            log.tail_accuracy(TAIL),
            eval.accuracy,
            eval.escalation_ratio,
            eval.mean_cost,
            eval.drop_ratio,
            fidelity,
        ],
    })
}

/// One training + evaluation run per cell, in parallel; rows come back in
/// axis order regardless of completion order.
pub fn sweep(config: &RunConfig, axes: &[Axis]) -> Result<Vec<SweepRow>> {
    if axes.is_empty() {
        return Err(CliError::Usage("sweep needs at least one --axis".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for a in axes {
        if !seen.insert(a.name.as_str()) {
            return Err(CliError::Usage(format!("axis `{}` given twice", a.name)));
        }
    }
    cells(axes)
        .par_iter()
        .map(|cell| sweep_cell(config, axes, cell))
        .collect()
}

pub fn write_sweep_csv(path: &Path, axes: &[Axis], rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: Vec<&str> = axes
        .iter()
        .map(|a| a.name.as_str())
        .chain(SWEEP_METRICS)
        .collect();
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row.cell.iter().chain(&row.metrics).map(f64::to_string))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn cmd_sweep(config: &RunConfig, axes: &[Axis]) -> Result<PathBuf> {
    let rows = sweep(config, axes)?;
    let path = config.out.join("grid.csv");
    write_sweep_csv(&path, axes, &rows)?;
    Ok(path)
}

pub const SURFACE_RESOLUTION: usize = 100;

pub fn reward_surface(config: &RunConfig) -> Result<Vec<SurfaceRow>> {
    Ok(reward_surface_sweep(
        &config.band,
        &unit_grid(SURFACE_RESOLUTION),
    )?)
}

pub fn cmd_reward_surface(config: &RunConfig) -> Result<PathBuf> {
    let rows = reward_surface(config)?;
    let path = config.out.join("reward_surface.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(SURFACE_HEADER)?;
    for r in &rows {
        w.write_record(&[
            r.rho.to_string(),
            r.e.to_string(),
            r.c.to_string(),
            r.delta_esc.to_string(),
            r.delta_ans.to_string(),
            r.r.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn replay(
    config: &RunConfig,
    stream_path: &Path,
    queries_path: &Path,
    policy_path: &Path,
) -> Result<(Vec<ActionTrace>, PipelineMetrics)> {
    let stream = read_stream_jsonl(open(stream_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", stream_path.display())))?;
    let queries = read_queries_jsonl(open(queries_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", queries_path.display())))?;
    let policy = read_policy(policy_path)?;
    let ep = Episode { stream, queries };
    Ok(run_pipeline(
        &pipeline_spec(config, &ep, &policy),
        RouteMode::Policy,
    )?)
}

pub fn cmd_replay(
    config: &RunConfig,
    stream_path: &Path,
    queries_path: &Path,
    policy_path: &Path,
) -> Result<PipelineMetrics> {
    let (trace, metrics) = replay(config, stream_path, queries_path, policy_path)?;
    let path = config.out.join("trace.jsonl");
    let mut w = create(&path)?;
    write_trace_jsonl(&mut w, &trace)?;
    finish(w, &path)?;
    write_json(&config.out.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

/// Writes the held-out episode as replayable files.
pub fn cmd_generate(config: &RunConfig) -> Result<()> {
    let ep = episode(config, EVAL_EPISODE)?;
    let path = config.out.join("stream.jsonl");
    let mut w = create(&path)?;
    write_stream_jsonl(&mut w, &ep.stream)?;
    finish(w, &path)?;
    let path = config.out.join("queries.jsonl");
    let mut w = create(&path)?;
    write_queries_jsonl(&mut w, &ep.queries)?;
    finish(w, &path)
}

pub fn impact(config: &RunConfig) -> Result<DeletionSummary> {
    Ok(deletion_experiment(
        &config.environment.stream,
        &config.memory,
        &config.impact.scorer,
        config.impact.trials,
        derive_seed(config.seed, &[tag::TRIAL]),
    )?)
}

pub fn cmd_impact(config: &RunConfig) -> Result<DeletionSummary> {
    let summary = impact(config)?;
    write_json(&config.out.join("impact.json"), &summary)?;
    Ok(summary)
}
