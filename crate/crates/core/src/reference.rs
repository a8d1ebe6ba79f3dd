//! The four-state progressive model used throughout the tests and demos.
//!
//! States advance only forward (S1 → S2 → S3 → S4) and S4 is absorbing.

use crate::cohort::CohortSpec;
use crate::schedule::{validate_schedule, RawEntry, TransitionSchedule};
use crate::state::StateSpace;

/// Off-diagonal one-cycle probabilities `(from, to, p)`, zero-based.
pub const PROGRESSIVE_TRANSITIONS: [(usize, usize, f64); 6] = [
    (0, 1, 0.1),
    (0, 2, 0.05),
    (0, 3, 0.14),
    (1, 2, 0.07),
    (1, 3, 0.17),
    (2, 3, 0.11),
];

pub const DEFAULT_COHORT_SIZE: u64 = 10_000;
pub const DEFAULT_HORIZON: usize = 50;

pub fn progressive_schedule() -> TransitionSchedule {
    let mut raw = vec![vec![RawEntry::Given(0.0); 4]; 4];
    for (i, row) in raw.iter_mut().enumerate() {
        row[i] = RawEntry::Implied;
    }
    for (from, to, p) in PROGRESSIVE_TRANSITIONS {
        raw[from][to] = RawEntry::Given(p);
    }
    validate_schedule(&[raw], 4, true).expect("reference matrix is stochastic")
}

/// Whole cohort of `n0` starting in S1, run for `horizon` one-year cycles.
pub fn progressive_cohort(n0: u64, horizon: usize) -> CohortSpec {
    CohortSpec::new(
        StateSpace::numbered(4).expect("labels"),
        progressive_schedule(),
        vec![n0, 0, 0, 0],
        horizon,
        1.0,
    )
    .expect("reference cohort is valid")
}
