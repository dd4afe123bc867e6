//! Evaluation campaigns: score comparison across algorithms, search cost
//! versus task count, and simulated stop ratios versus meet probabilities.
//!
//! Trials are independent and run on a worker pool. Every trial draws from
//! its own random stream derived from the master seed and the trial index,
//! so raw rows do not depend on the number of workers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{satisfies_mc_schedulability, Algorithm, AssignmentResult, DEFAULT_SEARCH_CAP};
use crate::dist::Ticks;
use crate::error::{Error, Result};
use crate::gen::{
    discard_check, generate_taskset, trial_rng, DiscardReason, DiscardVerdict, GenConfig,
    UTILIZATION_SAMPLER,
};
use crate::io::write_json;
use crate::sched::SchedAlgo;
use crate::sim::{simulate, SimConfig, DEFAULT_DURATION};
use crate::stats::Summary;
use crate::task::TaskSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Campaign {
    Scores,
    Runtime,
    StopRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub campaign: Campaign,
    pub gen: GenConfig,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
    pub seed: u64,
    pub sched: SchedAlgo,
    pub opt_cap: u128,
    /// Task counts swept by the runtime campaign.
    pub task_counts: Vec<usize>,
    pub sim_duration: Ticks,
    /// When false, `wall_ns` is written as 0 so raw rows are reproducible
    /// byte for byte.
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn new(campaign: Campaign) -> Self {
        let algorithms = match campaign {
            Campaign::Runtime => vec![Algorithm::Vwcet, Algorithm::Opt],
            _ => Algorithm::ALL.to_vec(),
        };
        Self {
            campaign,
            gen: GenConfig::default(),
            algorithms,
            trials: 200,
            jobs: 0,
            seed: 0,
            sched: SchedAlgo::Edf,
            opt_cap: DEFAULT_SEARCH_CAP,
            task_counts: (4..=10).collect(),
            // Generated periods are in thousands of ticks.
            sim_duration: DEFAULT_DURATION * 100,
            record_wall_time: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        if self.campaign == Campaign::Runtime && self.task_counts.is_empty() {
            return Err(Error::Config("task count sweep is empty".into()));
        }
        self.gen.validate()
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub trial: usize,
    pub algo: Algorithm,
    pub feasible: bool,
    pub score_lo: Option<f64>,
    pub test_calls: u64,
    pub wall_ns: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub n_tasks: usize,
    pub trial: usize,
    pub algo: Algorithm,
    pub feasible: bool,
    /// The exhaustive search exceeded its configuration cap.
    pub capped: bool,
    pub score_lo: Option<f64>,
    pub test_calls: u64,
    pub wall_ns: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRatioRow {
    pub trial: usize,
    pub algo: Algorithm,
    pub task: usize,
    pub budget: Ticks,
    /// Probability that a job fits in `budget`.
    pub p_meet: f64,
    /// One minus the simulated stop ratio.
    pub observed_meet: f64,
    pub released: u64,
    pub stopped: u64,
    pub deadline_misses: u64,
    /// `|p_meet - observed_meet| <= 3 * sqrt(p (1 - p) / released)`.
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardRow {
    pub trial: usize,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawRows {
    Scores(Vec<ScoreRow>),
    Runtime(Vec<RuntimeRow>),
    StopRatio(Vec<StopRatioRow>),
}

impl RawRows {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match self {
            RawRows::Scores(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            RawRows::Runtime(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            RawRows::StopRatio(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub campaign: Campaign,
    pub rows: RawRows,
    /// Keyed by algorithm name, or `algo/n=N/calls` and `algo/n=N/wall_ns`
    /// for the runtime campaign.
    pub summary: BTreeMap<String, Summary>,
    pub discards: Vec<DiscardRow>,
    pub kept_trials: usize,
}

impl CampaignResult {
    pub fn score_rows(&self) -> &[ScoreRow] {
        match &self.rows {
            RawRows::Scores(rows) => rows,
            _ => &[],
        }
    }

    pub fn runtime_rows(&self) -> &[RuntimeRow] {
        match &self.rows {
            RawRows::Runtime(rows) => rows,
            _ => &[],
        }
    }

    pub fn stop_rows(&self) -> &[StopRatioRow] {
        match &self.rows {
            RawRows::StopRatio(rows) => rows,
            _ => &[],
        }
    }

    pub fn mean(&self, key: &str) -> Option<f64> {
        self.summary.get(key).map(|s| s.mean)
    }

    /// Writes `raw.csv`, `discards.csv`, `summary.json` and `manifest.json`.
    pub fn write(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)?;
        fs::write(out_dir.join("raw.csv"), self.rows.to_csv()?)?;
        write_discards(&self.discards, out_dir)?;
        write_json(&out_dir.join("summary.json"), &self.summary)?;
        write_json(
            &out_dir.join("manifest.json"),
            &Manifest::new(cfg, self.kept_trials, &self.discards),
        )
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    utilization_sampler: &'static str,
    bucket_counts: Option<(usize, usize, usize)>,
    config: &'a ExperimentConfig,
    kept_trials: usize,
    discarded: BTreeMap<&'static str, usize>,
}

impl<'a> Manifest<'a> {
    fn new(cfg: &'a ExperimentConfig, kept_trials: usize, discards: &[DiscardRow]) -> Self {
        let mut discarded = BTreeMap::new();
        for d in discards {
            *discarded.entry(d.reason.as_str()).or_insert(0) += 1;
        }
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            utilization_sampler: UTILIZATION_SAMPLER,
            bucket_counts: cfg.gen.scenario.bucket_counts(cfg.gen.n_tasks),
            config: cfg,
            kept_trials,
            discarded,
        }
    }
}

pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    match cfg.campaign {
        Campaign::Scores => run_score_campaign(cfg),
        Campaign::Runtime => run_runtime_campaign(cfg),
        Campaign::StopRatio => run_stop_ratio_campaign(cfg),
    }
}

struct Timed {
    result: Result<AssignmentResult>,
    wall_ns: u128,
}

fn run_timed(algo: Algorithm, tasks: &TaskSet, cfg: &ExperimentConfig, random_seed: u64) -> Timed {
    let start = Instant::now();
    let result = algo.run(tasks, cfg.sched, random_seed, cfg.opt_cap);
    let wall_ns = if cfg.record_wall_time {
        start.elapsed().as_nanos()
    } else {
        0
    };
    Timed { result, wall_ns }
}

/// A generated trial: the task set plus the seed for the random ordering.
fn draw_trial(gen: &GenConfig, seed: u64, trial: u64) -> Result<(TaskSet, u64)> {
    let mut rng = trial_rng(seed, trial);
    let tasks = generate_taskset(gen, &mut rng)?;
    Ok((tasks, rng.random()))
}

enum TrialOutcome<R> {
    Kept(Vec<R>),
    Discarded(DiscardReason),
}

fn check_assigned(
    tasks: &TaskSet,
    algo: Algorithm,
    result: &AssignmentResult,
    sched: SchedAlgo,
) -> Result<()> {
    match result.budgets() {
        Some(b) if !satisfies_mc_schedulability(tasks, b, sched) => Err(Error::Config(format!(
            "{algo} returned an assignment that is not mixed-criticality schedulable"
        ))),
        _ => Ok(()),
    }
}

fn score_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome<ScoreRow>> {
    let (tasks, random_seed) = match draw_trial(&cfg.gen, cfg.seed, trial as u64) {
        Ok(t) => t,
        Err(Error::BucketUnreachable { .. }) => {
            return Ok(TrialOutcome::Discarded(DiscardReason::BucketUnreachable))
        }
        Err(e) => return Err(e),
    };
    let mut rows = Vec::with_capacity(cfg.algorithms.len());
    let mut results = Vec::with_capacity(cfg.algorithms.len());
    for &algo in &cfg.algorithms {
        let timed = run_timed(algo, &tasks, cfg, random_seed);
        let result = match timed.result {
            Ok(r) => r,
            Err(Error::SearchSpaceTooLarge { .. }) => AssignmentResult {
                outcome: crate::assign::Outcome::Infeasible,
                sched_test_calls: 0,
            },
            Err(e) => return Err(e),
        };
        check_assigned(&tasks, algo, &result, cfg.sched)?;
        rows.push(ScoreRow {
            trial,
            algo,
            feasible: result.is_assigned(),
            score_lo: result.score_lo(),
            test_calls: result.sched_test_calls,
            wall_ns: timed.wall_ns,
        });
        results.push(result);
    }
    Ok(match discard_check(&tasks, &results) {
        DiscardVerdict::Keep => TrialOutcome::Kept(rows),
        DiscardVerdict::Discard(reason) => TrialOutcome::Discarded(reason),
    })
}

fn collect<R>(outcomes: Vec<Result<TrialOutcome<R>>>) -> Result<(Vec<R>, Vec<DiscardRow>, usize)> {
    let mut rows = Vec::new();
    let mut discards = Vec::new();
    let mut kept = 0;
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            TrialOutcome::Kept(r) => {
                kept += 1;
                rows.extend(r);
            }
            TrialOutcome::Discarded(reason) => discards.push(DiscardRow { trial, reason }),
        }
    }
    Ok((rows, discards, kept))
}

fn all_discarded(trials: usize, discards: &[DiscardRow]) -> Error {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in discards {
        *counts.entry(d.reason.as_str()).or_insert(0) += 1;
    }
    let reasons = counts
        .iter()
        .map(|(r, c)| format!("{r}: {c}"))
        .collect::<Vec<_>>()
        .join(", ");
    Error::AllTrialsDiscarded { trials, reasons }
}

/// Scores every algorithm on `cfg.trials` generated task sets. Trials where
/// the BCET utilization exceeds 1 or no algorithm finds an assignment are
/// discarded after all algorithms ran. Infeasible rows carry no score.
pub fn run_score_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let outcomes = cfg.pool()?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| score_trial(cfg, t))
            .collect()
    });
    let (rows, discards, kept) = collect(outcomes)?;
    if kept == 0 {
        return Err(all_discarded(cfg.trials, &discards));
    }
    let mut summary = BTreeMap::new();
    for &algo in &cfg.algorithms {
        let scores: Vec<f64> = rows
            .iter()
            .filter(|r| r.algo == algo)
            .filter_map(|r| r.score_lo)
            .collect();
        if let Some(s) = Summary::from_values(&scores) {
            summary.insert(algo.to_string(), s);
        }
    }
    Ok(CampaignResult {
        campaign: Campaign::Scores,
        rows: RawRows::Scores(rows),
        summary,
        discards,
        kept_trials: kept,
    })
}

/// Search cost of each algorithm as the task count grows. Every generated
/// set is kept; the interesting output is the test-call count and wall time.
pub fn run_runtime_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .task_counts
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let outcomes: Vec<Result<TrialOutcome<RuntimeRow>>> = cfg.pool()?.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(index, &(n, trial))| {
                let gen = GenConfig {
                    n_tasks: n,
                    ..cfg.gen.clone()
                };
                let (tasks, random_seed) = match draw_trial(&gen, cfg.seed, index as u64) {
                    Ok(t) => t,
                    Err(Error::BucketUnreachable { .. }) => {
                        return Ok(TrialOutcome::Discarded(DiscardReason::BucketUnreachable))
                    }
                    Err(e) => return Err(e),
                };
                let mut rows = Vec::new();
                for &algo in &cfg.algorithms {
                    let timed = run_timed(algo, &tasks, cfg, random_seed);
                    let (result, capped) = match timed.result {
                        Ok(r) => (Some(r), false),
                        Err(Error::SearchSpaceTooLarge { .. }) => (None, true),
                        Err(e) => return Err(e),
                    };
                    rows.push(RuntimeRow {
                        n_tasks: n,
                        trial,
                        algo,
                        feasible: result.as_ref().is_some_and(AssignmentResult::is_assigned),
                        capped,
                        score_lo: result.as_ref().and_then(AssignmentResult::score_lo),
                        test_calls: result.as_ref().map_or(0, |r| r.sched_test_calls),
                        wall_ns: timed.wall_ns,
                    });
                }
                Ok(TrialOutcome::Kept(rows))
            })
            .collect()
    });
    let (rows, discards, kept) = collect(outcomes)?;
    if kept == 0 {
        return Err(all_discarded(jobs.len(), &discards));
    }
    let mut summary = BTreeMap::new();
    for &n in &cfg.task_counts {
        for &algo in &cfg.algorithms {
            let sel: Vec<&RuntimeRow> = rows
                .iter()
                .filter(|r| r.n_tasks == n && r.algo == algo && !r.capped)
                .collect();
            let calls: Vec<f64> = sel.iter().map(|r| r.test_calls as f64).collect();
            let wall: Vec<f64> = sel.iter().map(|r| r.wall_ns as f64).collect();
            if let Some(s) = Summary::from_values(&calls) {
                summary.insert(format!("{algo}/n={n}/calls"), s);
            }
            if let Some(s) = Summary::from_values(&wall) {
                summary.insert(format!("{algo}/n={n}/wall_ns"), s);
            }
        }
    }
    Ok(CampaignResult {
        campaign: Campaign::Runtime,
        rows: RawRows::Runtime(rows),
        summary,
        discards,
        kept_trials: kept,
    })
}

/// Simulates every assignment found for `tasks` and pairs each task's meet
/// probability with its simulated complement of the stop ratio.
pub fn stop_ratio_rows(
    tasks: &TaskSet,
    algorithms: &[Algorithm],
    sched: SchedAlgo,
    opt_cap: u128,
    duration: Ticks,
    seed: u64,
    trial: usize,
) -> Result<Vec<StopRatioRow>> {
    let mut rows = Vec::new();
    for &algo in algorithms {
        let result = match algo.run(tasks, sched, seed, opt_cap) {
            Ok(r) => r,
            Err(Error::SearchSpaceTooLarge { .. }) => continue,
            Err(e) => return Err(e),
        };
        let Some(b) = result.budgets() else {
            continue;
        };
        let report = simulate(tasks, b, &SimConfig::new(sched, duration, seed))?;
        for (task, stats) in tasks.tasks().iter().zip(&report.tasks) {
            let p = task.dist.meet_prob(stats.budget);
            let observed = 1.0 - stats.stop_ratio;
            let bound = if stats.released == 0 {
                0.0
            } else {
                3.0 * (p * (1.0 - p) / stats.released as f64).sqrt()
            };
            rows.push(StopRatioRow {
                trial,
                algo,
                task: task.id,
                budget: stats.budget,
                p_meet: p,
                observed_meet: observed,
                released: stats.released,
                stopped: stats.stopped,
                deadline_misses: stats.deadline_misses,
                within_3se: (p - observed).abs() <= bound,
            });
        }
    }
    Ok(rows)
}

/// A kept task set and its trial index.
pub type KeptTrial = (usize, TaskSet);

/// Generates `cfg.trials` task sets and applies the discard rules, running
/// every configured algorithm to decide the "no solution" clause. Returns
/// the kept sets keyed by trial index along with the discards.
pub fn generate_trials(cfg: &ExperimentConfig) -> Result<(Vec<KeptTrial>, Vec<DiscardRow>)> {
    cfg.validate()?;
    let outcomes: Vec<Result<TrialOutcome<TaskSet>>> = cfg.pool()?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let (tasks, random_seed) = match draw_trial(&cfg.gen, cfg.seed, trial as u64) {
                    Ok(t) => t,
                    Err(Error::BucketUnreachable { .. }) => {
                        return Ok(TrialOutcome::Discarded(DiscardReason::BucketUnreachable))
                    }
                    Err(e) => return Err(e),
                };
                let mut results = Vec::with_capacity(cfg.algorithms.len());
                for &algo in &cfg.algorithms {
                    match algo.run(&tasks, cfg.sched, random_seed, cfg.opt_cap) {
                        Ok(r) => results.push(r),
                        Err(Error::SearchSpaceTooLarge { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                Ok(match discard_check(&tasks, &results) {
                    DiscardVerdict::Keep => TrialOutcome::Kept(vec![tasks]),
                    DiscardVerdict::Discard(reason) => TrialOutcome::Discarded(reason),
                })
            })
            .collect()
    });
    let mut kept = Vec::new();
    let mut discards = Vec::new();
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            TrialOutcome::Kept(mut sets) => kept.push((trial, sets.remove(0))),
            TrialOutcome::Discarded(reason) => discards.push(DiscardRow { trial, reason }),
        }
    }
    Ok((kept, discards))
}

/// Writes one `trial_NNNN.json` task set per kept trial, plus
/// `discards.csv` and `manifest.json`.
pub fn write_generated(
    cfg: &ExperimentConfig,
    kept: &[KeptTrial],
    discards: &[DiscardRow],
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    for (trial, tasks) in kept {
        write_json(
            &out_dir.join(format!("trial_{trial:04}.json")),
            &tasks.to_file(),
        )?;
    }
    write_discards(discards, out_dir)?;
    write_json(
        &out_dir.join("manifest.json"),
        &Manifest::new(cfg, kept.len(), discards),
    )
}

fn write_discards(discards: &[DiscardRow], out_dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out_dir.join("discards.csv"))?;
    w.write_record(["trial", "reason"])?;
    for d in discards {
        w.write_record([d.trial.to_string(), d.reason.as_str().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Stop-ratio rows for generated task sets, summarized per algorithm as the
/// absolute gap between meet probability and simulated meet rate.
pub fn run_stop_ratio_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let outcomes: Vec<Result<TrialOutcome<StopRatioRow>>> = cfg.pool()?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let (tasks, seed) = match draw_trial(&cfg.gen, cfg.seed, trial as u64) {
                    Ok(t) => t,
                    Err(Error::BucketUnreachable { .. }) => {
                        return Ok(TrialOutcome::Discarded(DiscardReason::BucketUnreachable))
                    }
                    Err(e) => return Err(e),
                };
                let rows = stop_ratio_rows(
                    &tasks,
                    &cfg.algorithms,
                    cfg.sched,
                    cfg.opt_cap,
                    cfg.sim_duration,
                    seed,
                    trial,
                )?;
                Ok(if rows.is_empty() {
                    TrialOutcome::Discarded(DiscardReason::NoSolution)
                } else {
                    TrialOutcome::Kept(rows)
                })
            })
            .collect()
    });
    let (rows, discards, kept) = collect(outcomes)?;
    if kept == 0 {
        return Err(all_discarded(cfg.trials, &discards));
    }
    Ok(stop_ratio_result(rows, discards, kept))
}

pub fn stop_ratio_result(
    rows: Vec<StopRatioRow>,
    discards: Vec<DiscardRow>,
    kept: usize,
) -> CampaignResult {
    let mut gaps: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        gaps.entry(r.algo.to_string())
            .or_default()
            .push((r.p_meet - r.observed_meet).abs());
    }
    let summary = gaps
        .into_iter()
        .filter_map(|(k, v)| Summary::from_values(&v).map(|s| (k, s)))
        .collect();
    CampaignResult {
        campaign: Campaign::StopRatio,
        rows: RawRows::StopRatio(rows),
        summary,
        discards,
        kept_trials: kept,
    }
}
