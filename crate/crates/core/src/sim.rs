//! Preemptive uniprocessor scheduling simulator with budget enforcement.
//!
//! Time advances in whole ticks from event to event (releases, completions,
//! budget exhaustion). All tasks release synchronously at 0 and strictly
//! periodically afterwards. Each job's actual execution time is drawn when
//! it is released; with enforcement on, a job that has consumed its budget
//! without completing is stopped on the spot.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{EmpiricalDistribution, Ticks};
use crate::error::Result;
use crate::sched::{priority_order, Priority, SchedAlgo};
use crate::task::{BudgetAssignment, ConcreteTaskSet, TaskSet};

/// Ten minutes at a 1 kHz tick.
pub const DEFAULT_DURATION: Ticks = 600_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimPolicy {
    FixedPriority(Priority),
    Edf,
}

impl From<SchedAlgo> for SimPolicy {
    fn from(algo: SchedAlgo) -> Self {
        match algo.priority() {
            Some(p) => SimPolicy::FixedPriority(p),
            None => SimPolicy::Edf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub policy: SimPolicy,
    pub duration: Ticks,
    pub enforcement: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(policy: impl Into<SimPolicy>, duration: Ticks, seed: u64) -> Self {
        Self {
            policy: policy.into(),
            duration: duration.max(1),
            enforcement: true,
            seed,
        }
    }

    pub fn without_enforcement(self) -> Self {
        Self {
            enforcement: false,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub id: usize,
    pub budget: Ticks,
    pub released: u64,
    pub completed: u64,
    pub stopped: u64,
    pub in_flight: u64,
    pub deadline_misses: u64,
    pub stop_ratio: f64,
    /// Largest response time among completed jobs.
    pub worst_response: Option<Ticks>,
    /// Response time of the job released at 0, if it completed.
    pub first_response: Option<Ticks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub duration: Ticks,
    pub busy_ticks: Ticks,
    pub idle_ticks: Ticks,
    pub tasks: Vec<TaskStats>,
}

impl SimReport {
    pub fn total_deadline_misses(&self) -> u64 {
        self.tasks.iter().map(|t| t.deadline_misses).sum()
    }
}

/// Simulates `tasks` under assignment `b`; each job's execution time is
/// drawn from its task's distribution using a stream derived from
/// `(cfg.seed, task id)`.
pub fn simulate(tasks: &TaskSet, b: &BudgetAssignment, cfg: &SimConfig) -> Result<SimReport> {
    let cts = tasks.instantiate(b)?;
    let mut rngs: Vec<ChaCha8Rng> = tasks
        .tasks()
        .iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t.id as u64);
            rng
        })
        .collect();
    let dists: Vec<&EmpiricalDistribution> = tasks.tasks().iter().map(|t| &t.dist).collect();
    Ok(run(&cts, cfg, |i| dists[i].sample(&mut rngs[i])))
}

/// Simulates a concrete set in which every job executes exactly its budget.
pub fn simulate_concrete(cts: &ConcreteTaskSet, cfg: &SimConfig) -> SimReport {
    run(cts, cfg, |i| cts.tasks[i].budget)
}

#[derive(Debug)]
struct Job {
    task: usize,
    index: u64,
    release: Ticks,
    deadline: Ticks,
    actual: Ticks,
    consumed: Ticks,
}

fn run(cts: &ConcreteTaskSet, cfg: &SimConfig, mut draw: impl FnMut(usize) -> Ticks) -> SimReport {
    let n = cts.tasks.len();
    let rank: Vec<usize> = match cfg.policy {
        SimPolicy::FixedPriority(p) => {
            let mut rank = vec![0; n];
            for (r, i) in priority_order(cts, p).into_iter().enumerate() {
                rank[i] = r;
            }
            rank
        }
        SimPolicy::Edf => (0..n).collect(),
    };
    let key = |job: &Job| match cfg.policy {
        SimPolicy::FixedPriority(_) => (rank[job.task] as Ticks, job.release),
        SimPolicy::Edf => (job.deadline, job.task as Ticks),
    };

    let mut stats: Vec<TaskStats> = cts
        .tasks
        .iter()
        .map(|t| TaskStats {
            id: t.id,
            budget: t.budget,
            released: 0,
            completed: 0,
            stopped: 0,
            in_flight: 0,
            deadline_misses: 0,
            stop_ratio: 0.0,
            worst_response: None,
            first_response: None,
        })
        .collect();
    let mut next_release: Vec<Ticks> = vec![0; n];
    let mut active: Vec<Job> = Vec::new();
    let (mut now, mut busy, mut idle) = (0, 0, 0);

    while now < cfg.duration {
        for (i, task) in cts.tasks.iter().enumerate() {
            if next_release[i] == now {
                active.push(Job {
                    task: i,
                    index: stats[i].released,
                    release: now,
                    deadline: now + task.deadline,
                    actual: draw(i),
                    consumed: 0,
                });
                stats[i].released += 1;
                next_release[i] += task.period;
            }
        }
        let upcoming = next_release
            .iter()
            .copied()
            .min()
            .unwrap_or(Ticks::MAX)
            .min(cfg.duration);

        // Zero budget or zero demand terminates without running.
        active.retain(
            |job| match termination(job, cts.tasks[job.task].budget, cfg.enforcement) {
                Some(kind) => {
                    record(&mut stats[job.task], job, kind, now);
                    false
                }
                None => true,
            },
        );

        let Some(pos) = (0..active.len()).min_by_key(|&k| key(&active[k])) else {
            idle += upcoming - now;
            now = upcoming;
            continue;
        };
        let job = &mut active[pos];
        let budget = cts.tasks[job.task].budget;
        let mut run_for = job.actual - job.consumed;
        if cfg.enforcement && job.actual > budget {
            run_for = run_for.min(budget - job.consumed);
        }
        run_for = run_for.min(upcoming - now);
        job.consumed += run_for;
        busy += run_for;
        now += run_for;
        if let Some(kind) = termination(job, budget, cfg.enforcement) {
            let job = active.swap_remove(pos);
            record(&mut stats[job.task], &job, kind, now);
        }
    }

    for job in &active {
        let s = &mut stats[job.task];
        s.in_flight += 1;
        if job.deadline <= cfg.duration {
            s.deadline_misses += 1;
        }
    }
    for s in &mut stats {
        s.stop_ratio = if s.released == 0 {
            0.0
        } else {
            s.stopped as f64 / s.released as f64
        };
    }
    SimReport {
        duration: cfg.duration,
        busy_ticks: busy,
        idle_ticks: idle,
        tasks: stats,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Termination {
    Completed,
    Stopped,
}

fn termination(job: &Job, budget: Ticks, enforcement: bool) -> Option<Termination> {
    if job.consumed >= job.actual {
        Some(Termination::Completed)
    } else if enforcement && job.consumed >= budget {
        Some(Termination::Stopped)
    } else {
        None
    }
}

fn record(s: &mut TaskStats, job: &Job, kind: Termination, now: Ticks) {
    if now > job.deadline {
        s.deadline_misses += 1;
    }
    match kind {
        Termination::Stopped => s.stopped += 1,
        Termination::Completed => {
            s.completed += 1;
            let response = now - job.release;
            s.worst_response = Some(s.worst_response.map_or(response, |w| w.max(response)));
            if job.index == 0 {
                s.first_response = Some(response);
            }
        }
    }
}
