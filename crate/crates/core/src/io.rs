//! JSON and text file formats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assign::AssignmentResult;
use crate::dist::{EmpiricalDistribution, Ticks};
use crate::error::{Error, Result};
use crate::task::{BudgetAssignment, Subset, TaskSet, TaskSetFile};

/// Assignment output. `budgets` is `null` when no assignment was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub algo: String,
    pub sched: String,
    pub feasible: bool,
    pub budgets: Option<Vec<Ticks>>,
    pub score_lo: Option<f64>,
    pub score_hi: Option<f64>,
    pub sched_test_calls: u64,
}

impl AssignmentFile {
    pub fn new(tasks: &TaskSet, algo: &str, sched: &str, result: &AssignmentResult) -> Self {
        let budgets = result.budgets();
        Self {
            algo: algo.to_string(),
            sched: sched.to_string(),
            feasible: budgets.is_some(),
            budgets: budgets.map(|b| b.0.clone()),
            score_lo: budgets.map(|b| tasks.score(b, Subset::Lo)),
            score_hi: budgets.map(|b| tasks.score(b, Subset::Hi)),
            sched_test_calls: result.sched_test_calls,
        }
    }

    pub fn assignment(&self) -> Result<BudgetAssignment> {
        self.budgets
            .clone()
            .map(BudgetAssignment)
            .ok_or_else(|| Error::Config("assignment file holds no budgets".into()))
    }
}

pub fn read_taskset(path: &Path) -> Result<TaskSet> {
    let file: TaskSetFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    TaskSet::from_file(file)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Reads a distribution either as JSON (`{"samples": [[v, c], ...]}`) or
/// as a newline-separated sample log.
pub fn read_distribution(path: &Path) -> Result<EmpiricalDistribution> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(&text)?)
    } else {
        EmpiricalDistribution::from_sample_log(&text)
    }
}
