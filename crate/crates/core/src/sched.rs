//! Uniprocessor schedulability tests for concrete task sets.
//!
//! Both tests are sustainable with respect to execution times: shrinking any
//! budget of an accepted set keeps it accepted. Budget searches rely on that.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use crate::dist::Ticks;
use crate::error::{Error, Result};
use crate::task::{ConcreteTaskSet, TaskSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Priority {
    RateMonotonic,
    DeadlineMonotonic,
}

/// Scheduling policy together with its schedulability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedAlgo {
    Rm,
    Dm,
    Edf,
}

impl SchedAlgo {
    pub fn priority(self) -> Option<Priority> {
        match self {
            SchedAlgo::Rm => Some(Priority::RateMonotonic),
            SchedAlgo::Dm => Some(Priority::DeadlineMonotonic),
            SchedAlgo::Edf => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchedAlgo::Rm => "rm",
            SchedAlgo::Dm => "dm",
            SchedAlgo::Edf => "edf",
        }
    }
}

impl fmt::Display for SchedAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rm" => Ok(SchedAlgo::Rm),
            "dm" => Ok(SchedAlgo::Dm),
            "edf" => Ok(SchedAlgo::Edf),
            other => Err(Error::Config(format!("unknown scheduler {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedVerdict {
    pub schedulable: bool,
    /// Worst-case response time per task id (fixed priority only). `None`
    /// marks a task whose recurrence crossed its deadline or was not
    /// analysed because an earlier task already failed.
    pub response_times: Option<Vec<Option<Ticks>>>,
}

/// A schedulability test over concrete task sets.
pub trait SchedTest {
    fn verdict(&self, cts: &ConcreteTaskSet) -> SchedVerdict;

    fn is_schedulable(&self, cts: &ConcreteTaskSet) -> bool {
        self.verdict(cts).schedulable
    }
}

impl SchedTest for SchedAlgo {
    fn verdict(&self, cts: &ConcreteTaskSet) -> SchedVerdict {
        match self.priority() {
            Some(p) => rta_fixed_priority(cts, p),
            None => edf_demand_test(cts),
        }
    }

    fn is_schedulable(&self, cts: &ConcreteTaskSet) -> bool {
        match self.priority() {
            Some(p) => rta(cts, p, true).schedulable,
            None => edf_demand_test(cts).schedulable,
        }
    }
}

impl<T: SchedTest + ?Sized> SchedTest for &T {
    fn verdict(&self, cts: &ConcreteTaskSet) -> SchedVerdict {
        (**self).verdict(cts)
    }

    fn is_schedulable(&self, cts: &ConcreteTaskSet) -> bool {
        (**self).is_schedulable(cts)
    }
}

/// Wraps a test and counts how many verdicts it computed. Each search owns
/// its own counter.
#[derive(Debug)]
pub struct CountingTest<T> {
    inner: T,
    calls: Cell<u64>,
}

impl<T: SchedTest> CountingTest<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }
}

impl<T: SchedTest> SchedTest for CountingTest<T> {
    fn verdict(&self, cts: &ConcreteTaskSet) -> SchedVerdict {
        self.calls.set(self.calls.get() + 1);
        self.inner.verdict(cts)
    }

    fn is_schedulable(&self, cts: &ConcreteTaskSet) -> bool {
        self.calls.set(self.calls.get() + 1);
        self.inner.is_schedulable(cts)
    }
}

/// Task indices from highest to lowest priority. Ties go to the lower id.
pub fn priority_order(cts: &ConcreteTaskSet, priority: Priority) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cts.tasks.len()).collect();
    order.sort_by_key(|&i| {
        let t = &cts.tasks[i];
        let key = match priority {
            Priority::RateMonotonic => t.period,
            Priority::DeadlineMonotonic => t.deadline,
        };
        (key, i)
    });
    order
}

/// Response-time analysis for preemptive fixed-priority scheduling.
pub fn rta_fixed_priority(cts: &ConcreteTaskSet, priority: Priority) -> SchedVerdict {
    rta(cts, priority, false)
}

fn rta(cts: &ConcreteTaskSet, priority: Priority, stop_at_first_miss: bool) -> SchedVerdict {
    let order = priority_order(cts, priority);
    let mut response = vec![None; cts.tasks.len()];
    let mut schedulable = true;
    for (rank, &i) in order.iter().enumerate() {
        let task = &cts.tasks[i];
        let hp = &order[..rank];
        let mut r = task.budget;
        let fixed_point = loop {
            if r > task.deadline {
                break None;
            }
            let next = task.budget
                + hp.iter()
                    .map(|&j| {
                        let other = &cts.tasks[j];
                        r.div_ceil(other.period) * other.budget
                    })
                    .sum::<Ticks>();
            if next == r {
                break Some(r);
            }
            r = next;
        };
        response[i] = fixed_point;
        if fixed_point.is_none() {
            schedulable = false;
            if stop_at_first_miss {
                break;
            }
        }
    }
    SchedVerdict {
        schedulable,
        response_times: Some(response),
    }
}

/// Cumulative execution demand of jobs with release and deadline in `[0, t]`
/// under synchronous release.
pub fn demand_bound(cts: &ConcreteTaskSet, t: u128) -> u128 {
    cts.tasks
        .iter()
        .map(|task| {
            let d = task.deadline as u128;
            if t < d {
                0
            } else {
                ((t - d) / task.period as u128 + 1) * task.budget as u128
            }
        })
        .sum()
}

/// Processor-demand test for preemptive EDF with constrained deadlines.
///
/// Utilization is compared exactly by scaling to the hyperperiod. Deadline
/// points are checked up to the smallest of the hyperperiod, the
/// utilization-based bound (when `U < 1`), and the synchronous busy period.
pub fn edf_demand_test(cts: &ConcreteTaskSet) -> SchedVerdict {
    let verdict = |schedulable| SchedVerdict {
        schedulable,
        response_times: None,
    };
    if cts.tasks.is_empty() {
        return verdict(true);
    }
    let h = cts.hyperperiod();
    let scaled_u: u128 = cts
        .tasks
        .iter()
        .map(|t| t.budget as u128 * (h / t.period as u128))
        .sum();
    if scaled_u > h {
        return verdict(false);
    }
    let mut horizon = h;
    if scaled_u < h {
        let max_d = cts.tasks.iter().map(|t| t.deadline as u128).max().unwrap();
        let slack: u128 = cts
            .tasks
            .iter()
            .map(|t| (t.period - t.deadline) as u128 * t.budget as u128 * (h / t.period as u128))
            .sum();
        let la = max_d.max(slack.div_ceil(h - scaled_u));
        horizon = horizon.min(la);
    }
    horizon = horizon.min(synchronous_busy_period(cts, h));

    for task in &cts.tasks {
        let mut t = task.deadline as u128;
        while t <= horizon {
            if demand_bound(cts, t) > t {
                return verdict(false);
            }
            t += task.period as u128;
        }
    }
    verdict(true)
}

/// Length of the busy period starting at a synchronous release, capped at
/// `cap`. Only meaningful for `U <= 1`.
fn synchronous_busy_period(cts: &ConcreteTaskSet, cap: u128) -> u128 {
    let mut w: u128 = cts.tasks.iter().map(|t| t.budget as u128).sum();
    loop {
        if w >= cap {
            return cap;
        }
        let next: u128 = cts
            .tasks
            .iter()
            .map(|t| w.div_ceil(t.period as u128) * t.budget as u128)
            .sum();
        if next == w {
            return w;
        }
        w = next;
    }
}

/// Default limit on the number of joint outcomes enumerated by
/// [`prob_deadline_miss_bruteforce`].
pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 10_000_000;

/// Exact probability that the first job of `target` finishes after its
/// deadline when all tasks release synchronously at time 0 and every job's
/// execution time is drawn independently from its task's distribution.
///
/// Enumerates every joint outcome of the target's first job and the jobs of
/// higher-priority tasks released before the target's deadline, and
/// simulates each realization under preemptive fixed priorities.
pub fn prob_deadline_miss_bruteforce(
    tasks: &TaskSet,
    target: usize,
    priority: Priority,
    cap: u128,
) -> Result<f64> {
    let target_task = tasks.task(target)?;
    let deadline = target_task.deadline;
    let cts = tasks.instantiate_unchecked(&tasks.wcet_assignment());
    let order = priority_order(&cts, priority);
    let target_rank = order.iter().position(|&i| i == target).unwrap();

    // (rank, release, task id)
    let mut jobs: Vec<(usize, Ticks, usize)> = Vec::new();
    for (rank, &i) in order[..target_rank].iter().enumerate() {
        let period = tasks.tasks()[i].period;
        let mut release = 0;
        while release < deadline {
            jobs.push((rank, release, i));
            release += period;
        }
    }
    jobs.push((target_rank, 0, target));

    let supports: Vec<&[(Ticks, u64)]> = jobs
        .iter()
        .map(|&(_, _, i)| tasks.tasks()[i].dist.values())
        .collect();
    let outcomes = supports
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    if outcomes > cap {
        return Err(Error::BruteForceTooLarge { outcomes, cap });
    }
    let totals: Vec<f64> = jobs
        .iter()
        .map(|&(_, _, i)| tasks.tasks()[i].dist.total() as f64)
        .collect();

    let mut digits = vec![0usize; jobs.len()];
    let mut exec = vec![0; jobs.len()];
    let mut miss = 0.0;
    loop {
        let mut p = 1.0;
        for (k, &d) in digits.iter().enumerate() {
            let (value, count) = supports[k][d];
            exec[k] = value;
            p *= count as f64 / totals[k];
        }
        if !fits_before(&jobs, &exec, deadline) {
            miss += p;
        }

        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok(miss);
            }
            digits[k] += 1;
            if digits[k] < supports[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Simulates one realization; the last job is the one under analysis.
/// Returns whether it completes by `deadline`.
fn fits_before(jobs: &[(usize, Ticks, usize)], exec: &[Ticks], deadline: Ticks) -> bool {
    let target = jobs.len() - 1;
    let mut remaining = exec.to_vec();
    let mut now: Ticks = 0;
    loop {
        if remaining[target] == 0 {
            return now <= deadline;
        }
        if now >= deadline {
            return false;
        }
        let running = (0..jobs.len())
            .filter(|&k| jobs[k].1 <= now && remaining[k] > 0)
            .min_by_key(|&k| (jobs[k].0, jobs[k].1));
        let next_release = jobs
            .iter()
            .map(|j| j.1)
            .filter(|&r| r > now)
            .min()
            .unwrap_or(Ticks::MAX);
        match running {
            Some(k) => {
                let run = remaining[k].min(next_release - now);
                remaining[k] -= run;
                now += run;
            }
            None => now = next_release,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example;
    use crate::task::BudgetAssignment;

    fn example_budgets(b: [Ticks; 3]) -> ConcreteTaskSet {
        ConcreteTaskSet::from_params(&[(b[0], 6, 6), (b[1], 9, 9), (b[2], 12, 12)]).unwrap()
    }

    #[test]
    fn rta_worked_example() {
        let v = rta_fixed_priority(&example_budgets([3, 1, 3]), Priority::RateMonotonic);
        assert!(v.schedulable);
        assert_eq!(v.response_times.unwrap(), vec![Some(3), Some(4), Some(11)]);

        let v = rta_fixed_priority(&example_budgets([3, 3, 3]), Priority::RateMonotonic);
        assert!(!v.schedulable);
        assert_eq!(v.response_times.unwrap(), vec![Some(3), Some(6), None]);

        let v = rta_fixed_priority(&example_budgets([1, 1, 1]), Priority::RateMonotonic);
        assert_eq!(v.response_times.unwrap(), vec![Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn rta_medians_of_worked_example_diverge() {
        // 3 -> 8 -> 11 -> 13 > 12
        let v = rta_fixed_priority(&example_budgets([3, 2, 3]), Priority::RateMonotonic);
        assert!(!v.schedulable);
    }

    #[test]
    fn priority_ties_break_by_id() {
        let cts = ConcreteTaskSet::from_params(&[(1, 5, 10), (1, 3, 10), (1, 4, 8)]).unwrap();
        assert_eq!(priority_order(&cts, Priority::RateMonotonic), vec![2, 0, 1]);
        assert_eq!(
            priority_order(&cts, Priority::DeadlineMonotonic),
            vec![1, 2, 0]
        );
    }

    #[test]
    fn edf_examples() {
        let full = ConcreteTaskSet::from_params(&[(1, 2, 2), (1, 2, 2)]).unwrap();
        assert!(edf_demand_test(&full).schedulable);

        let ex = example_budgets([3, 3, 3]);
        assert!(!edf_demand_test(&ex).schedulable);
        // The second job of the 9-period task has its deadline at 18.
        assert_eq!(demand_bound(&ex, 12), 12);

        let single = ConcreteTaskSet::from_params(&[(2, 1, 4)]).unwrap();
        assert_eq!(demand_bound(&single, 1), 2);
        assert!(!edf_demand_test(&single).schedulable);
        assert!(!rta_fixed_priority(&single, Priority::RateMonotonic).schedulable);

        assert!(edf_demand_test(&example_budgets([3, 1, 3])).schedulable);
    }

    #[test]
    fn edf_rejects_constrained_deadline_overload_below_full_utilization() {
        // U = 0.5 + 0.5 = 1 but both deadlines at 1.
        let cts = ConcreteTaskSet::from_params(&[(1, 1, 2), (1, 1, 2)]).unwrap();
        assert!(!edf_demand_test(&cts).schedulable);
        let cts = ConcreteTaskSet::from_params(&[(1, 1, 4), (1, 2, 4)]).unwrap();
        assert!(edf_demand_test(&cts).schedulable);
    }

    #[test]
    fn counting_wrapper_counts_each_call() {
        let test = CountingTest::new(SchedAlgo::Rm);
        let cts = example_budgets([3, 1, 3]);
        assert!(test.is_schedulable(&cts));
        let _ = test.verdict(&cts);
        assert_eq!(test.calls(), 2);
    }

    #[test]
    fn brute_force_miss_probability_of_worked_example() {
        let ts = worked_example();
        let p =
            prob_deadline_miss_bruteforce(&ts, 2, Priority::RateMonotonic, DEFAULT_BRUTE_FORCE_CAP)
                .unwrap();
        // Frozen from an independent enumeration over the 243 joint outcomes.
        assert!((p - 0.20472).abs() < 1e-9, "{p}");

        let err = prob_deadline_miss_bruteforce(&ts, 2, Priority::RateMonotonic, 100).unwrap_err();
        assert!(err
            .to_string()
            .contains("instance too large for brute force"));
        assert!(prob_deadline_miss_bruteforce(&ts, 7, Priority::RateMonotonic, 100).is_err());
    }

    #[test]
    fn brute_force_on_point_distributions() {
        use crate::task::{Criticality, TaskSpec, TvKind};
        let spec = |id, c, t| TaskSpec {
            id,
            criticality: Criticality::Lo,
            deadline: t,
            period: t,
            samples: vec![(c, 1)],
            percentiles: None,
        };
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![spec(0, 3, 6), spec(1, 1, 9), spec(2, 3, 12)],
        )
        .unwrap();
        let p = prob_deadline_miss_bruteforce(&ts, 2, Priority::RateMonotonic, 10).unwrap();
        assert_eq!(p, 0.0);

        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![spec(0, 3, 6), spec(1, 3, 9), spec(2, 3, 12)],
        )
        .unwrap();
        let p = prob_deadline_miss_bruteforce(&ts, 2, Priority::RateMonotonic, 10).unwrap();
        assert_eq!(p, 1.0);
        let verdict = rta_fixed_priority(
            &ts.instantiate(&BudgetAssignment(vec![3, 3, 3])).unwrap(),
            Priority::RateMonotonic,
        );
        assert!(!verdict.schedulable);
    }

    #[test]
    fn brute_force_single_task_never_misses() {
        use crate::task::{Criticality, TaskSpec, TvKind};
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![TaskSpec {
                id: 0,
                criticality: Criticality::Hi,
                deadline: 5,
                period: 8,
                samples: vec![(1, 3), (4, 2), (5, 1)],
                percentiles: None,
            }],
        )
        .unwrap();
        let p = prob_deadline_miss_bruteforce(&ts, 0, Priority::DeadlineMonotonic, 10).unwrap();
        assert_eq!(p, 0.0);
    }
}
