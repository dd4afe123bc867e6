//! Random mixed-criticality task sets for the simulation campaigns.
//!
//! Per task: a period, a constrained deadline, a WCET from a share of the
//! set's target utilization, a BCET some percent below it, and a sampled
//! execution-time distribution drawn from a truncated normal between the
//! two. Scenarios constrain the skewness of each task's distribution by
//! position.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assign::AssignmentResult;
use crate::dist::{EmpiricalDistribution, Ticks};
use crate::error::{Error, Result};
use crate::task::{Criticality, TaskSet, TaskSpec, TvKind};

/// Name of the utilization sampler, recorded in run metadata.
pub const UTILIZATION_SAMPLER: &str = "uunifast";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Mostly right-skewed (skewness > 2) distributions.
    S1,
    /// Mostly left-skewed (skewness < -2) distributions.
    S2,
    /// No constraint on the shape.
    S3,
}

impl Scenario {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Scenario::S1),
            2 => Ok(Scenario::S2),
            3 => Ok(Scenario::S3),
            _ => Err(Error::Config(format!(
                "scenario must be 1, 2 or 3, got {i}"
            ))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Scenario::S1 => 1,
            Scenario::S2 => 2,
            Scenario::S3 => 3,
        }
    }

    /// `(skewness > 2, in [-2, 2], skewness < -2)` task counts for `n` tasks.
    /// The 80% share rounds up, the 10% share rounds down and the other
    /// bucket takes the remainder.
    pub fn bucket_counts(self, n: usize) -> Option<(usize, usize, usize)> {
        let major = (0.8 * n as f64).ceil() as usize;
        let middle = (0.1 * n as f64).floor() as usize;
        let minor = n.saturating_sub(major + middle);
        match self {
            Scenario::S1 => Some((major, middle, minor)),
            Scenario::S2 => Some((minor, middle, major)),
            Scenario::S3 => None,
        }
    }

    /// Skewness constraint per task position.
    pub fn buckets(self, n: usize) -> Vec<SkewBucket> {
        match self.bucket_counts(n) {
            None => vec![SkewBucket::Any; n],
            Some((pos, mid, neg)) => std::iter::repeat_n(SkewBucket::Positive, pos)
                .chain(std::iter::repeat_n(SkewBucket::Middle, mid))
                .chain(std::iter::repeat_n(SkewBucket::Negative, neg))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkewBucket {
    /// Skewness above 2.
    Positive,
    /// Skewness within `[-2, 2]`.
    Middle,
    /// Skewness below -2.
    Negative,
    Any,
}

impl SkewBucket {
    pub fn accepts(self, dist: &EmpiricalDistribution) -> bool {
        if self == SkewBucket::Any {
            return true;
        }
        let Ok(s) = dist.skewness() else {
            return false;
        };
        match self {
            SkewBucket::Positive => s > 2.0,
            SkewBucket::Middle => (-2.0..=2.0).contains(&s),
            SkewBucket::Negative => s < -2.0,
            SkewBucket::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_tasks: usize,
    /// Ticks per period unit. Periods are drawn from `period_range` in
    /// units and scaled, so execution times have sub-unit resolution.
    pub ticks_per_unit: u64,
    /// Range of the total WCET utilization of the set.
    pub u_max_range: (f64, f64),
    pub period_range: (Ticks, Ticks),
    /// Deadline as a fraction of the period.
    pub deadline_fraction_range: (f64, f64),
    /// Percent by which a task's BCET utilization sits below its WCET
    /// utilization.
    pub u_reduction_range: (f64, f64),
    /// The standard deviation is `(WCET - BCET) / x` with `x` drawn here.
    pub sd_divisor_range: (f64, f64),
    pub scenario: Scenario,
    pub percentiles: Vec<f64>,
    pub samples_per_task: usize,
    /// The last `n_hi` tasks are HI.
    pub n_hi: usize,
    pub tv_kind: TvKind,
    pub retry_cap: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_tasks: 6,
            ticks_per_unit: 1000,
            u_max_range: (1.0, 1.45),
            period_range: (4, 102),
            deadline_fraction_range: (0.5, 1.0),
            u_reduction_range: (1.0, 45.0),
            sd_divisor_range: (2.0, 40.0),
            scenario: Scenario::S3,
            percentiles: vec![80.0, 60.0, 50.0],
            samples_per_task: 1000,
            n_hi: 0,
            tv_kind: TvKind::Vwcet,
            retry_cap: 10_000,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_tasks == 0 {
            return bad("n_tasks must be at least 1");
        }
        if self.ticks_per_unit == 0 {
            return bad("ticks_per_unit must be at least 1");
        }
        if self.n_hi > self.n_tasks {
            return bad("n_hi exceeds n_tasks");
        }
        let ranges = [
            ("u_max_range", self.u_max_range),
            ("deadline_fraction_range", self.deadline_fraction_range),
            ("u_reduction_range", self.u_reduction_range),
            ("sd_divisor_range", self.sd_divisor_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name} is empty")));
            }
        }
        if self.u_max_range.0 <= 0.0 {
            return bad("u_max_range must be positive");
        }
        if self.deadline_fraction_range.0 <= 0.0 || self.deadline_fraction_range.1 > 1.0 {
            return bad("deadline_fraction_range must lie in (0, 1]");
        }
        if self.u_reduction_range.0 < 0.0 || self.u_reduction_range.1 >= 100.0 {
            return bad("u_reduction_range must lie in [0, 100)");
        }
        if self.sd_divisor_range.0 <= 0.0 {
            return bad("sd_divisor_range must be positive");
        }
        let (pmin, pmax) = self.period_range;
        if pmin == 0 || pmin > pmax {
            return bad("period_range is empty");
        }
        if self.samples_per_task < 2 {
            return bad("samples_per_task must be at least 2");
        }
        if self.percentiles.is_empty() {
            return bad("percentile list is empty");
        }
        Ok(())
    }
}

/// Random stream for trial `trial` of a campaign seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform sample from the set of `n` positive utilizations summing to
/// `u_total`.
pub fn generate_utilizations<R: Rng + ?Sized>(n: usize, u_total: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut remaining = u_total;
    for i in (1..n).rev() {
        let next = remaining * rng.random::<f64>().powf(1.0 / i as f64);
        out.push(remaining - next);
        remaining = next;
    }
    out.push(remaining);
    out
}

fn uniform_f64<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn round_ticks(x: f64) -> Ticks {
    ((x + 0.5).floor() as Ticks).max(1)
}

/// Draws one task set.
pub fn generate_taskset<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<TaskSet> {
    cfg.validate()?;
    let n = cfg.n_tasks;
    let u_total = uniform_f64(rng, cfg.u_max_range);
    let utilizations = generate_utilizations(n, u_total, rng);
    let buckets = cfg.scenario.buckets(n);

    let mut specs = Vec::with_capacity(n);
    for (id, (&u_max, &bucket)) in utilizations.iter().zip(&buckets).enumerate() {
        let period = rng.random_range(cfg.period_range.0..=cfg.period_range.1) * cfg.ticks_per_unit;
        let (flo, fhi) = cfg.deadline_fraction_range;
        let d_lo = ((flo * period as f64).ceil() as Ticks).max(1);
        let d_hi = ((fhi * period as f64).floor() as Ticks).clamp(d_lo, period);
        let deadline = rng.random_range(d_lo..=d_hi);

        let reduction = uniform_f64(rng, cfg.u_reduction_range);
        let u_min = u_max * (1.0 - reduction / 100.0);
        let wcet = round_ticks(u_max * period as f64);
        let bcet = round_ticks(u_min * period as f64).min(wcet);

        let dist =
            sample_distribution(cfg, bucket, bcet, wcet, rng).ok_or(Error::BucketUnreachable {
                task: id,
                attempts: cfg.retry_cap,
            })?;
        let criticality = if id >= n - cfg.n_hi {
            Criticality::Hi
        } else {
            Criticality::Lo
        };
        specs.push(TaskSpec {
            id,
            criticality,
            deadline,
            period,
            samples: dist.values().to_vec(),
            percentiles: Some(cfg.percentiles.clone()),
        });
    }
    TaskSet::new(cfg.tv_kind, specs)
}

/// Truncated-normal samples in `[bcet, wcet]` with both endpoints present,
/// redrawn until the skewness bucket accepts them.
fn sample_distribution<R: Rng + ?Sized>(
    cfg: &GenConfig,
    bucket: SkewBucket,
    bcet: Ticks,
    wcet: Ticks,
    rng: &mut R,
) -> Option<EmpiricalDistribution> {
    let (lo, hi) = (bcet as f64, wcet as f64);
    let mut samples: Vec<Ticks> = Vec::with_capacity(cfg.samples_per_task);
    for _ in 0..cfg.retry_cap {
        let mean = uniform_f64(rng, (lo, hi));
        let divisor = uniform_f64(rng, cfg.sd_divisor_range);
        let sd = (hi - lo) / divisor;
        samples.clear();
        samples.push(bcet);
        samples.push(wcet);
        if sd > 0.0 {
            let normal = Normal::new(mean, sd).expect("finite positive sd");
            while samples.len() < cfg.samples_per_task {
                let x = normal.sample(rng);
                if (lo..=hi).contains(&x) {
                    samples.push(x.round() as Ticks);
                }
            }
        } else {
            samples.resize(cfg.samples_per_task, bcet);
        }
        let dist = EmpiricalDistribution::from_samples(&samples).expect("positive samples");
        if bucket.accepts(&dist) {
            return Some(dist);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscardReason {
    /// The BCET utilization already exceeds 1.
    BcetUtilization,
    /// No compared algorithm produced an assignment.
    NoSolution,
    /// A task's skewness bucket could not be met.
    BucketUnreachable,
}

impl DiscardReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscardReason::BcetUtilization => "bcet-utilization",
            DiscardReason::NoSolution => "no-solution",
            DiscardReason::BucketUnreachable => "bucket-unreachable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardVerdict {
    Keep,
    Discard(DiscardReason),
}

pub fn bcet_utilization(tasks: &TaskSet) -> f64 {
    tasks
        .tasks()
        .iter()
        .map(|t| t.bcet() as f64 / t.period as f64)
        .sum()
}

/// Keeps a trial only if its BCET utilization is at most 1 and at least one
/// algorithm found an assignment.
pub fn discard_check(tasks: &TaskSet, attempts: &[AssignmentResult]) -> DiscardVerdict {
    if bcet_utilization(tasks) > 1.0 {
        DiscardVerdict::Discard(DiscardReason::BcetUtilization)
    } else if !attempts.iter().any(AssignmentResult::is_assigned) {
        DiscardVerdict::Discard(DiscardReason::NoSolution)
    } else {
        DiscardVerdict::Keep
    }
}
