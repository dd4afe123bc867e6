//! Budget assignment: the variability-ordered greedy heuristic, its
//! ordering baselines, the Medians baseline and the exhaustive optimum.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Ticks;
use crate::error::{Error, Result};
use crate::sched::{CountingTest, SchedTest};
use crate::task::{BudgetAssignment, Subset, TaskSet, TvKind};

/// Default limit on the number of configurations [`optimal_assign`] visits.
pub const DEFAULT_SEARCH_CAP: u128 = 10_000_000;

/// Order in which the greedy heuristic picks LO tasks for budget reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingStrategy {
    /// Highest variability first.
    Variability(TvKind),
    PeriodAsc,
    DeadlineAsc,
    Random {
        seed: u64,
    },
}

impl OrderingStrategy {
    /// LO task ids in selection order. Equal keys go to the lower id.
    pub fn selection_order(self, tasks: &TaskSet) -> Vec<usize> {
        let mut ids: Vec<usize> = tasks.lo_tasks().map(|t| t.id).collect();
        let all = tasks.tasks();
        match self {
            OrderingStrategy::Variability(kind) => {
                let tv: Vec<f64> = all.iter().map(|t| kind.evaluate(&t.dist)).collect();
                ids.sort_by(|&a, &b| tv[b].total_cmp(&tv[a]).then(a.cmp(&b)));
            }
            OrderingStrategy::PeriodAsc => ids.sort_by_key(|&i| (all[i].period, i)),
            OrderingStrategy::DeadlineAsc => ids.sort_by_key(|&i| (all[i].deadline, i)),
            OrderingStrategy::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                ids.shuffle(&mut rng);
            }
        }
        ids
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Assigned {
        budgets: BudgetAssignment,
        score_lo: f64,
    },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub outcome: Outcome,
    pub sched_test_calls: u64,
}

impl AssignmentResult {
    pub fn is_assigned(&self) -> bool {
        matches!(self.outcome, Outcome::Assigned { .. })
    }

    pub fn budgets(&self) -> Option<&BudgetAssignment> {
        match &self.outcome {
            Outcome::Assigned { budgets, .. } => Some(budgets),
            Outcome::Infeasible => None,
        }
    }

    pub fn score_lo(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Assigned { score_lo, .. } => Some(score_lo),
            Outcome::Infeasible => None,
        }
    }
}

fn assigned(tasks: &TaskSet, budgets: BudgetAssignment, calls: u64) -> AssignmentResult {
    let score_lo = tasks.score(&budgets, Subset::Lo);
    AssignmentResult {
        outcome: Outcome::Assigned { budgets, score_lo },
        sched_test_calls: calls,
    }
}

fn infeasible(calls: u64) -> AssignmentResult {
    AssignmentResult {
        outcome: Outcome::Infeasible,
        sched_test_calls: calls,
    }
}

/// Greedy budget reduction.
///
/// If the set is unschedulable with every LO task at its smallest
/// candidate, it is reported infeasible. Otherwise every task starts at its
/// WCET and, while the set is unschedulable, the next LO task in `ordering`
/// has its budget lowered one catalog step at a time until the set becomes
/// schedulable or the catalog is exhausted.
///
/// The test runs at most `2 + m * nbLO` times.
pub fn heuristic_assign<T: SchedTest>(
    tasks: &TaskSet,
    ordering: OrderingStrategy,
    test: T,
) -> AssignmentResult {
    let test = CountingTest::new(test);
    let schedulable = |b: &BudgetAssignment| test.is_schedulable(&tasks.instantiate_unchecked(b));

    if !schedulable(&tasks.minimal_assignment()) {
        return infeasible(test.calls());
    }

    let mut budgets = tasks.wcet_assignment();
    let mut ok = schedulable(&budgets);
    let mut candidates = ordering.selection_order(tasks).into_iter();
    while !ok {
        let Some(i) = candidates.next() else {
            return infeasible(test.calls());
        };
        for option in &tasks.tasks()[i].catalog.options()[1..] {
            budgets.0[i] = option.value;
            if schedulable(&budgets) {
                ok = true;
                break;
            }
        }
    }
    assigned(tasks, budgets, test.calls())
}

/// Every LO task at its median, HI tasks at WCET. When the median is not a
/// catalog entry the smallest catalog budget above it is used.
pub fn medians_assign<T: SchedTest>(tasks: &TaskSet, test: T) -> AssignmentResult {
    let budgets = BudgetAssignment(
        tasks
            .tasks()
            .iter()
            .map(|t| {
                if !t.is_lo() {
                    return t.catalog.wcet();
                }
                let median = t.dist.median();
                t.catalog
                    .values()
                    .filter(|&v| v >= median)
                    .last()
                    .unwrap_or_else(|| t.catalog.wcet())
            })
            .collect(),
    );
    let test = CountingTest::new(test);
    if test.is_schedulable(&tasks.instantiate_unchecked(&budgets)) {
        assigned(tasks, budgets, test.calls())
    } else {
        infeasible(test.calls())
    }
}

/// Exhaustive search over all LO catalog combinations, HI tasks pinned to
/// WCET. Returns the schedulable assignment with the largest LO score; among
/// equal scores the lexicographically larger budget vector wins.
pub fn optimal_assign<T: SchedTest>(
    tasks: &TaskSet,
    test: T,
    cap: u128,
) -> Result<AssignmentResult> {
    let lo: Vec<usize> = tasks.lo_tasks().map(|t| t.id).collect();
    let all = tasks.tasks();
    let configurations = lo
        .iter()
        .try_fold(1u128, |acc, &i| {
            acc.checked_mul(all[i].catalog.len() as u128)
        })
        .unwrap_or(u128::MAX);
    if configurations > cap {
        return Err(Error::SearchSpaceTooLarge {
            configurations,
            cap,
        });
    }

    // Every LO score shares the denominator prod(total_i), so numerators
    // compare exactly whenever that product fits.
    let exact = lo
        .iter()
        .try_fold(1u128, |acc, &i| {
            acc.checked_mul(all[i].dist.total() as u128)
        })
        .is_some();

    let test = CountingTest::new(test);
    let mut budgets = tasks.wcet_assignment();
    let mut digits = vec![0usize; lo.len()];
    let mut best: Option<(ScoreKey, BudgetAssignment)> = None;
    loop {
        for (k, &i) in lo.iter().enumerate() {
            budgets.0[i] = all[i].catalog.options()[digits[k]].value;
        }
        if test.is_schedulable(&tasks.instantiate_unchecked(&budgets)) {
            let key = ScoreKey::new(tasks, &lo, &digits, exact);
            let better = match &best {
                None => true,
                Some((best_key, best_budgets)) => match key.cmp(best_key) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => budgets.0 > best_budgets.0,
                },
            };
            if better {
                best = Some((key, budgets.clone()));
            }
        }

        let mut k = 0;
        loop {
            if k == lo.len() {
                return Ok(match best {
                    Some((_, b)) => assigned(tasks, b, test.calls()),
                    None => infeasible(test.calls()),
                });
            }
            digits[k] += 1;
            if digits[k] < all[lo[k]].catalog.len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScoreKey {
    Exact(u128),
    Approx(f64),
}

impl ScoreKey {
    fn new(tasks: &TaskSet, lo: &[usize], digits: &[usize], exact: bool) -> Self {
        let options = lo
            .iter()
            .zip(digits)
            .map(|(&i, &d)| tasks.tasks()[i].catalog.options()[d]);
        if exact {
            ScoreKey::Exact(options.map(|o| o.meet_count as u128).product())
        } else {
            ScoreKey::Approx(options.map(|o| o.meet_prob).product())
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ScoreKey::Exact(a), ScoreKey::Exact(b)) => a.cmp(b),
            (ScoreKey::Approx(a), ScoreKey::Approx(b)) => a.total_cmp(b),
            _ => unreachable!("score keys of one search share a representation"),
        }
    }
}

/// The algorithms compared by the experiment campaigns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vwcet,
    Skw,
    Periods,
    Deadlines,
    Random,
    Medians,
    Opt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Vwcet,
        Algorithm::Skw,
        Algorithm::Periods,
        Algorithm::Deadlines,
        Algorithm::Random,
        Algorithm::Medians,
        Algorithm::Opt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Vwcet => "vwcet",
            Algorithm::Skw => "skw",
            Algorithm::Periods => "periods",
            Algorithm::Deadlines => "deadlines",
            Algorithm::Random => "random",
            Algorithm::Medians => "medians",
            Algorithm::Opt => "opt",
        }
    }

    /// Ordering used by the heuristic variants; `None` for Medians and Opt.
    pub fn ordering(self, seed: u64) -> Option<OrderingStrategy> {
        match self {
            Algorithm::Vwcet => Some(OrderingStrategy::Variability(TvKind::Vwcet)),
            Algorithm::Skw => Some(OrderingStrategy::Variability(TvKind::Skewness)),
            Algorithm::Periods => Some(OrderingStrategy::PeriodAsc),
            Algorithm::Deadlines => Some(OrderingStrategy::DeadlineAsc),
            Algorithm::Random => Some(OrderingStrategy::Random { seed }),
            Algorithm::Medians | Algorithm::Opt => None,
        }
    }

    /// Runs the algorithm. `seed` only affects [`Algorithm::Random`] and
    /// `cap` only [`Algorithm::Opt`].
    pub fn run<T: SchedTest>(
        self,
        tasks: &TaskSet,
        test: T,
        seed: u64,
        cap: u128,
    ) -> Result<AssignmentResult> {
        match self {
            Algorithm::Medians => Ok(medians_assign(tasks, test)),
            Algorithm::Opt => optimal_assign(tasks, test, cap),
            _ => Ok(heuristic_assign(
                tasks,
                self.ordering(seed).expect("heuristic variant"),
                test,
            )),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Both conditions of mixed-criticality schedulability: the instantiated
/// set passes `test` and every HI task keeps its WCET.
pub fn satisfies_mc_schedulability<T: SchedTest>(
    tasks: &TaskSet,
    b: &BudgetAssignment,
    test: T,
) -> bool {
    tasks.validate(b).is_ok()
        && tasks.hi_budgets_at_wcet(b)
        && test.is_schedulable(&tasks.instantiate_unchecked(b))
}

/// Budget values of an assignment for the LO tasks only, in id order.
pub fn lo_budgets(tasks: &TaskSet, b: &BudgetAssignment) -> Vec<Ticks> {
    tasks.lo_tasks().map(|t| b.0[t.id]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{worked_example, worked_example_with};
    use crate::sched::SchedAlgo;
    use crate::task::{Criticality, TaskSpec};

    fn spec(
        id: usize,
        crit: Criticality,
        d: Ticks,
        t: Ticks,
        samples: Vec<(Ticks, u64)>,
    ) -> TaskSpec {
        TaskSpec {
            id,
            criticality: crit,
            deadline: d,
            period: t,
            samples,
            percentiles: None,
        }
    }

    #[test]
    fn heuristic_on_worked_example() {
        let ts = worked_example();
        let order = OrderingStrategy::Variability(TvKind::Vwcet).selection_order(&ts);
        assert_eq!(order, vec![1, 0]);
        let r = heuristic_assign(
            &ts,
            OrderingStrategy::Variability(TvKind::Vwcet),
            SchedAlgo::Rm,
        );
        assert_eq!(r.budgets().unwrap().0, vec![3, 1, 3]);
        assert!((r.score_lo().unwrap() - 0.4).abs() < 1e-12);
        // gate, initial check, then budgets 2 and 1 for the second task
        assert_eq!(r.sched_test_calls, 4);
    }

    #[test]
    fn heuristic_skips_loop_when_wcet_fits() {
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![
                spec(0, Criticality::Lo, 50, 50, vec![(1, 3)]),
                spec(1, Criticality::Lo, 80, 100, vec![(1, 1)]),
            ],
        )
        .unwrap();
        let r = heuristic_assign(&ts, OrderingStrategy::PeriodAsc, SchedAlgo::Rm);
        assert_eq!(r.budgets().unwrap().0, vec![1, 1]);
        assert_eq!(r.score_lo(), Some(1.0));
        assert_eq!(r.sched_test_calls, 2);
    }

    #[test]
    fn heuristic_gate_rejects_infeasible_set() {
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![
                spec(0, Criticality::Lo, 6, 6, vec![(1, 10), (2, 20), (3, 70)]),
                spec(1, Criticality::Lo, 9, 9, vec![(1, 40), (2, 50), (3, 10)]),
                spec(2, Criticality::Hi, 2, 12, vec![(1, 10), (2, 10), (3, 80)]),
            ],
        )
        .unwrap();
        let r = heuristic_assign(
            &ts,
            OrderingStrategy::Variability(TvKind::Vwcet),
            SchedAlgo::Rm,
        );
        assert_eq!(r.outcome, Outcome::Infeasible);
        assert_eq!(r.sched_test_calls, 1);
        assert_eq!(
            medians_assign(&ts, SchedAlgo::Rm).outcome,
            Outcome::Infeasible
        );
        assert_eq!(
            optimal_assign(&ts, SchedAlgo::Rm, DEFAULT_SEARCH_CAP)
                .unwrap()
                .outcome,
            Outcome::Infeasible
        );
    }

    #[test]
    fn optimal_on_worked_example() {
        let ts = worked_example();
        let r = optimal_assign(&ts, SchedAlgo::Rm, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.budgets().unwrap().0, vec![3, 1, 3]);
        assert!((r.score_lo().unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(r.sched_test_calls, 9);
    }

    /// Independent enumerator: nested loops over explicit budget lists,
    /// hand-written RTA for the three-task rate-monotonic example.
    fn brute_force_variant(p1: &[(Ticks, f64)], p2: &[(Ticks, f64)]) -> (f64, Ticks, Ticks) {
        fn fits(c1: Ticks, c2: Ticks) -> bool {
            let periods = [6u64, 9, 12];
            let c = [c1, c2, 3];
            (0..3).all(|i| {
                let mut r = c[i];
                loop {
                    let next = c[i] + (0..i).map(|j| r.div_ceil(periods[j]) * c[j]).sum::<u64>();
                    if next > periods[i] {
                        return false;
                    }
                    if next == r {
                        return true;
                    }
                    r = next;
                }
            })
        }
        let mut best = (-1.0, 0, 0);
        for &(c1, q1) in p1 {
            for &(c2, q2) in p2 {
                if fits(c1, c2) && q1 * q2 > best.0 {
                    best = (q1 * q2, c1, c2);
                }
            }
        }
        best
    }

    #[test]
    fn optimal_matches_independent_enumerator() {
        let ts = worked_example_with(TvKind::Vwcet, [(1, 10), (2, 80), (3, 10)]);
        let (score, c1, c2) = brute_force_variant(
            &[(3, 1.0), (2, 0.9), (1, 0.1)],
            &[(3, 1.0), (2, 0.9), (1, 0.4)],
        );
        let r = optimal_assign(&ts, SchedAlgo::Rm, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.budgets().unwrap().0, vec![c1, c2, 3]);
        assert!((r.score_lo().unwrap() - score).abs() < 1e-12);
        assert_eq!((c1, c2), (2, 2));
        assert!((score - 0.81).abs() < 1e-12);
        assert_eq!(r.sched_test_calls, 9);
    }

    #[test]
    fn optimal_single_task_keeps_wcet() {
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![spec(0, Criticality::Lo, 10, 10, vec![(2, 1), (4, 1)])],
        )
        .unwrap();
        let r = optimal_assign(&ts, SchedAlgo::Edf, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.budgets().unwrap().0, vec![4]);
        assert_eq!(r.score_lo(), Some(1.0));
    }

    #[test]
    fn optimal_respects_cap() {
        let ts = worked_example();
        let err = optimal_assign(&ts, SchedAlgo::Rm, 8).unwrap_err();
        assert!(err.to_string().contains("search space too large"));
    }

    #[test]
    fn optimal_ties_prefer_larger_budgets() {
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![
                spec(0, Criticality::Lo, 3, 3, vec![(1, 1), (2, 1)]),
                spec(1, Criticality::Lo, 3, 3, vec![(1, 1), (2, 1)]),
            ],
        )
        .unwrap();
        // (2,2) overloads; (2,1) and (1,2) both score 0.5.
        let r = optimal_assign(&ts, SchedAlgo::Edf, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.budgets().unwrap().0, vec![2, 1]);
        assert_eq!(r.score_lo(), Some(0.5));
    }

    #[test]
    fn medians_on_worked_example_is_unschedulable_under_rm() {
        let ts = worked_example();
        let r = medians_assign(&ts, SchedAlgo::Rm);
        assert_eq!(r.outcome, Outcome::Infeasible);
        assert_eq!(r.sched_test_calls, 1);
        // Under EDF the median budgets (3, 2, 3) fit.
        let r = medians_assign(&ts, SchedAlgo::Edf);
        assert_eq!(r.budgets().unwrap().0, vec![3, 2, 3]);
        assert!((r.score_lo().unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn medians_trivially_schedulable() {
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![
                spec(0, Criticality::Lo, 100, 100, vec![(1, 2), (2, 1), (3, 1)]),
                spec(1, Criticality::Lo, 100, 100, vec![(1, 1), (2, 3)]),
            ],
        )
        .unwrap();
        let r = medians_assign(&ts, SchedAlgo::Rm);
        assert_eq!(r.budgets().unwrap().0, vec![1, 2]);
        assert!((r.score_lo().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orderings_break_ties_by_id() {
        let ts = TaskSet::new(
            TvKind::Vwcet,
            vec![
                spec(0, Criticality::Lo, 10, 20, vec![(1, 1), (2, 1)]),
                spec(1, Criticality::Hi, 5, 10, vec![(1, 1)]),
                spec(2, Criticality::Lo, 10, 10, vec![(1, 1), (2, 1)]),
                spec(3, Criticality::Lo, 10, 10, vec![(3, 1)]),
            ],
        )
        .unwrap();
        assert_eq!(
            OrderingStrategy::PeriodAsc.selection_order(&ts),
            vec![2, 3, 0]
        );
        assert_eq!(
            OrderingStrategy::DeadlineAsc.selection_order(&ts),
            vec![0, 2, 3]
        );
        assert_eq!(
            OrderingStrategy::Variability(TvKind::Vwcet).selection_order(&ts),
            vec![0, 2, 3]
        );
        // Constant distribution has undefined skewness and goes last.
        assert_eq!(
            OrderingStrategy::Variability(TvKind::Skewness).selection_order(&ts),
            vec![0, 2, 3]
        );
        let r1 = OrderingStrategy::Random { seed: 9 }.selection_order(&ts);
        let r2 = OrderingStrategy::Random { seed: 9 }.selection_order(&ts);
        assert_eq!(r1, r2);
        let mut sorted = r1.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 2, 3]);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("greedy".parse::<Algorithm>().is_err());
    }
}
