//! Execution-time budget assignment for mixed-criticality real-time tasks.
//!
//! Execution-time distributions are summarized by dispersion parameters
//! ([`dist`]); LO-criticality tasks receive budgets below their WCET, chosen
//! greedily in order of variability ([`assign`]) so that the budgeted task
//! set passes a schedulability test ([`sched`]). Jobs that exceed their
//! budget are stopped at run time, which the simulator ([`sim`]) models.

pub mod assign;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod gen;
pub mod io;
pub mod sched;
pub mod sim;
pub mod stats;
pub mod task;

pub use error::{Error, Result};
