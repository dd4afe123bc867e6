//! Small reference task sets.

use crate::task::{Criticality, TaskSet, TaskSpec, TvKind};

/// Two LO tasks and one HI task with three-valued execution-time
/// distributions of 100 samples each, scheduled under rate monotonic.
///
/// Catalogs span the full support `{3, 2, 1}`.
pub fn worked_example() -> TaskSet {
    worked_example_with(TvKind::Vwcet, [(1, 10), (2, 20), (3, 70)])
}

/// The worked example with the first task's distribution replaced.
pub fn worked_example_with(tv_kind: TvKind, tau1: [(u64, u64); 3]) -> TaskSet {
    let spec = |id, criticality, period, samples: Vec<(u64, u64)>| TaskSpec {
        id,
        criticality,
        deadline: period,
        period,
        samples,
        percentiles: None,
    };
    TaskSet::new(
        tv_kind,
        vec![
            spec(0, Criticality::Lo, 6, tau1.to_vec()),
            spec(1, Criticality::Lo, 9, vec![(1, 40), (2, 50), (3, 10)]),
            spec(2, Criticality::Hi, 12, vec![(1, 10), (2, 10), (3, 80)]),
        ],
    )
    .expect("worked example is well formed")
}
