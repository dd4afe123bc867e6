//! Mixed-criticality task model: budget catalogs, budget assignments,
//! scores, and concrete task sets with one fixed budget per task.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dist::{EmpiricalDistribution, Ticks};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criticality {
    #[serde(rename = "LO")]
    Lo,
    #[serde(rename = "HI")]
    Hi,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Lo => "LO",
            Criticality::Hi => "HI",
        })
    }
}

/// Dispersion parameter used as the execution-time variability of every
/// task in a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TvKind {
    Vwcet,
    Skewness,
}

impl TvKind {
    /// Variability of `dist` under this parameter. An undefined skewness
    /// (constant distribution) maps to negative infinity so the task sorts
    /// last under descending variability.
    pub fn evaluate(self, dist: &EmpiricalDistribution) -> f64 {
        match self {
            TvKind::Vwcet => dist.vwcet(),
            TvKind::Skewness => dist.skewness().unwrap_or(f64::NEG_INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetOption {
    pub value: Ticks,
    /// Occurrences of the source distribution that fit in `value`.
    pub meet_count: u64,
    pub meet_prob: f64,
}

/// Candidate budgets for one task, strictly decreasing, starting at the
/// WCET.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetCatalog {
    options: Vec<BudgetOption>,
}

impl BudgetCatalog {
    /// WCET plus the given percentiles of `dist`, deduplicated.
    pub fn build(dist: &EmpiricalDistribution, percentiles: &[f64]) -> Result<Self> {
        if percentiles.is_empty() {
            return Err(Error::Config("percentile list is empty".into()));
        }
        let mut values = vec![dist.max()];
        for &q in percentiles {
            values.push(dist.percentile(q)?);
        }
        Ok(Self::from_values(dist, values))
    }

    /// Every value of the distribution's support is a candidate budget.
    pub fn from_support(dist: &EmpiricalDistribution) -> Self {
        Self::from_values(dist, dist.support().collect())
    }

    fn from_values(dist: &EmpiricalDistribution, mut values: Vec<Ticks>) -> Self {
        values.sort_unstable_by(|a, b| b.cmp(a));
        values.dedup();
        let options = values
            .into_iter()
            .map(|value| {
                let meet_count = dist.meet_count(value);
                BudgetOption {
                    value,
                    meet_count,
                    meet_prob: meet_count as f64 / dist.total() as f64,
                }
            })
            .collect();
        Self { options }
    }

    pub fn options(&self) -> &[BudgetOption] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    /// `b_1`, the WCET.
    pub fn wcet(&self) -> Ticks {
        self.options[0].value
    }

    /// `b_m`, the smallest candidate.
    pub fn min_budget(&self) -> Ticks {
        self.options[self.options.len() - 1].value
    }

    pub fn find(&self, budget: Ticks) -> Option<&BudgetOption> {
        self.options.iter().find(|o| o.value == budget)
    }

    pub fn values(&self) -> impl Iterator<Item = Ticks> + '_ {
        self.options.iter().map(|o| o.value)
    }
}

#[derive(Debug, Clone)]
pub struct MixedCriticalityTask {
    pub id: usize,
    pub criticality: Criticality,
    pub deadline: Ticks,
    pub period: Ticks,
    pub dist: EmpiricalDistribution,
    /// Percentiles the catalog was built from; `None` means the full support.
    pub percentiles: Option<Vec<f64>>,
    pub catalog: BudgetCatalog,
    pub tv: f64,
}

impl MixedCriticalityTask {
    pub fn is_lo(&self) -> bool {
        self.criticality == Criticality::Lo
    }

    pub fn wcet(&self) -> Ticks {
        self.dist.max()
    }

    pub fn bcet(&self) -> Ticks {
        self.dist.min()
    }
}

/// Everything needed to build a task; the catalog and variability are
/// derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: usize,
    pub criticality: Criticality,
    #[serde(rename = "D")]
    pub deadline: Ticks,
    #[serde(rename = "T")]
    pub period: Ticks,
    pub samples: Vec<(Ticks, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSetFile {
    pub tv_kind: TvKind,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone)]
pub struct TaskSet {
    tv_kind: TvKind,
    tasks: Vec<MixedCriticalityTask>,
}

impl TaskSet {
    pub fn new(tv_kind: TvKind, specs: Vec<TaskSpec>) -> Result<Self> {
        let tasks = specs
            .into_iter()
            .enumerate()
            .map(|(position, spec)| {
                if spec.id != position {
                    return Err(Error::TaskIds {
                        position,
                        found: spec.id,
                    });
                }
                let dist = EmpiricalDistribution::from_counts(spec.samples)?;
                Self::make_task(
                    tv_kind,
                    spec.id,
                    spec.criticality,
                    spec.deadline,
                    spec.period,
                    dist,
                    spec.percentiles,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tv_kind, tasks })
    }

    fn make_task(
        tv_kind: TvKind,
        id: usize,
        criticality: Criticality,
        deadline: Ticks,
        period: Ticks,
        dist: EmpiricalDistribution,
        percentiles: Option<Vec<f64>>,
    ) -> Result<MixedCriticalityTask> {
        if deadline == 0 {
            return Err(Error::InvalidTask {
                id,
                reason: "deadline must be positive".into(),
            });
        }
        if deadline > period {
            return Err(Error::InvalidTask {
                id,
                reason: format!("deadline {deadline} exceeds period {period}"),
            });
        }
        let catalog = match &percentiles {
            Some(qs) => BudgetCatalog::build(&dist, qs)?,
            None => BudgetCatalog::from_support(&dist),
        };
        let tv = tv_kind.evaluate(&dist);
        Ok(MixedCriticalityTask {
            id,
            criticality,
            deadline,
            period,
            dist,
            percentiles,
            catalog,
            tv,
        })
    }

    pub fn from_file(file: TaskSetFile) -> Result<Self> {
        Self::new(file.tv_kind, file.tasks)
    }

    pub fn to_file(&self) -> TaskSetFile {
        TaskSetFile {
            tv_kind: self.tv_kind,
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskSpec {
                    id: t.id,
                    criticality: t.criticality,
                    deadline: t.deadline,
                    period: t.period,
                    samples: t.dist.values().to_vec(),
                    percentiles: t.percentiles.clone(),
                })
                .collect(),
        }
    }

    /// Same tasks with variability recomputed under another parameter.
    pub fn with_tv_kind(&self, tv_kind: TvKind) -> Self {
        let tasks = self
            .tasks
            .iter()
            .map(|t| MixedCriticalityTask {
                tv: tv_kind.evaluate(&t.dist),
                ..t.clone()
            })
            .collect();
        Self { tv_kind, tasks }
    }

    pub fn tv_kind(&self) -> TvKind {
        self.tv_kind
    }

    pub fn tasks(&self) -> &[MixedCriticalityTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: usize) -> Result<&MixedCriticalityTask> {
        self.tasks.get(id).ok_or(Error::UnknownTask(id))
    }

    pub fn lo_tasks(&self) -> impl Iterator<Item = &MixedCriticalityTask> {
        self.tasks.iter().filter(|t| t.is_lo())
    }

    /// Every task at its WCET.
    pub fn wcet_assignment(&self) -> BudgetAssignment {
        BudgetAssignment(self.tasks.iter().map(|t| t.catalog.wcet()).collect())
    }

    /// LO tasks at their smallest candidate, HI tasks at WCET.
    pub fn minimal_assignment(&self) -> BudgetAssignment {
        BudgetAssignment(
            self.tasks
                .iter()
                .map(|t| match t.criticality {
                    Criticality::Lo => t.catalog.min_budget(),
                    Criticality::Hi => t.catalog.wcet(),
                })
                .collect(),
        )
    }

    /// Checks that every budget of `b` is in the corresponding catalog.
    pub fn validate(&self, b: &BudgetAssignment) -> Result<()> {
        if b.0.len() != self.tasks.len() {
            return Err(Error::AssignmentLength {
                expected: self.tasks.len(),
                got: b.0.len(),
            });
        }
        for (task, &budget) in self.tasks.iter().zip(&b.0) {
            if task.catalog.find(budget).is_none() {
                return Err(Error::BudgetNotInCatalog {
                    task: task.id,
                    budget,
                });
            }
        }
        Ok(())
    }

    /// Fixes each task's execution time to its assigned budget.
    pub fn instantiate(&self, b: &BudgetAssignment) -> Result<ConcreteTaskSet> {
        self.validate(b)?;
        Ok(self.instantiate_unchecked(b))
    }

    pub(crate) fn instantiate_unchecked(&self, b: &BudgetAssignment) -> ConcreteTaskSet {
        ConcreteTaskSet {
            tasks: self
                .tasks
                .iter()
                .zip(&b.0)
                .map(|(t, &budget)| ConcreteTask {
                    id: t.id,
                    budget,
                    criticality: t.criticality,
                    deadline: t.deadline,
                    period: t.period,
                })
                .collect(),
        }
    }

    /// Product of the meet probabilities of the selected tasks. An empty
    /// selection scores 1.
    pub fn score(&self, b: &BudgetAssignment, subset: Subset) -> f64 {
        self.tasks
            .iter()
            .zip(&b.0)
            .filter(|(t, _)| subset.contains(t.criticality))
            .map(|(t, &budget)| t.dist.meet_prob(budget))
            .product()
    }

    /// True when every HI task is budgeted at its WCET, i.e. the HI score
    /// is exactly 1.
    pub fn hi_budgets_at_wcet(&self, b: &BudgetAssignment) -> bool {
        self.tasks
            .iter()
            .zip(&b.0)
            .all(|(t, &budget)| t.is_lo() || budget == t.catalog.wcet())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    Lo,
    Hi,
}

impl Subset {
    fn contains(self, c: Criticality) -> bool {
        match self {
            Subset::All => true,
            Subset::Lo => c == Criticality::Lo,
            Subset::Hi => c == Criticality::Hi,
        }
    }
}

/// One budget per task, indexed by task id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BudgetAssignment(pub Vec<Ticks>);

impl BudgetAssignment {
    pub fn budgets(&self) -> &[Ticks] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteTask {
    pub id: usize,
    pub budget: Ticks,
    pub criticality: Criticality,
    pub deadline: Ticks,
    pub period: Ticks,
}

impl ConcreteTask {
    pub fn utilization(&self) -> f64 {
        self.budget as f64 / self.period as f64
    }
}

/// A task set in which every task has a single fixed execution budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteTaskSet {
    pub tasks: Vec<ConcreteTask>,
}

impl ConcreteTaskSet {
    /// Builds a set from `(budget, deadline, period)` triples, all LO.
    pub fn from_params(params: &[(Ticks, Ticks, Ticks)]) -> Result<Self> {
        let tasks = params
            .iter()
            .enumerate()
            .map(|(id, &(budget, deadline, period))| {
                if budget == 0 || deadline == 0 || deadline > period {
                    return Err(Error::InvalidTask {
                        id,
                        reason: format!(
                            "need C > 0 and 0 < D <= T, got C={budget} D={deadline} T={period}"
                        ),
                    });
                }
                Ok(ConcreteTask {
                    id,
                    budget,
                    criticality: Criticality::Lo,
                    deadline,
                    period,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { tasks })
    }

    pub fn budgets(&self) -> BudgetAssignment {
        BudgetAssignment(self.tasks.iter().map(|t| t.budget).collect())
    }

    pub fn utilization(&self) -> f64 {
        self.tasks.iter().map(ConcreteTask::utilization).sum()
    }

    pub fn hyperperiod(&self) -> u128 {
        self.tasks
            .iter()
            .fold(1u128, |acc, t| lcm(acc, t.period as u128))
    }
}

pub(crate) fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn lcm(a: u128, b: u128) -> u128 {
    a / gcd(a, b) * b
}
