use crate::error::ModelError;
use crate::schedule::{TransitionSchedule, STOCHASTIC_TOL};

/// Probability vector over states for a single individual at one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyDistribution {
    probs: Vec<f64>,
}

impl OccupancyDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::InvalidDistribution("no states".into()));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(ModelError::InvalidDistribution(format!(
                "entry {k} = {p} is outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ModelError::InvalidDistribution(format!(
                "entries sum to {sum}"
            )));
        }
        Ok(Self { probs })
    }

    /// All mass on `state`.
    pub fn point_mass(states: usize, state: usize) -> Self {
        let mut probs = vec![0.0; states];
        probs[state] = 1.0;
        Self { probs }
    }

    /// The empirical distribution of a deterministic count vector.
    pub fn from_counts(counts: &[u64]) -> Result<Self, ModelError> {
        let n0: u64 = counts.iter().sum();
        if n0 == 0 {
            return Err(ModelError::EmptyCohort);
        }
        let total = n0 as f64;
        Ok(Self {
            probs: counts.iter().map(|&c| c as f64 / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// One cycle forward under `matrix`.
    pub(crate) fn step(&self, matrix: &crate::schedule::TransitionMatrix) -> Self {
        Self {
            probs: matrix.apply_left(&self.probs),
        }
    }
}

/// Occupancy after `cycles` elapsed cycles: `p0 · P(0) · P(1) ··· P(cycles − 1)`.
///
/// Exactly one matrix is applied per elapsed cycle, so `cycles = 0` returns
/// `p0` unchanged.
pub fn propagate_occupancy(
    p0: &OccupancyDistribution,
    schedule: &TransitionSchedule,
    cycles: usize,
) -> Result<OccupancyDistribution, ModelError> {
    if p0.len() != schedule.dim() {
        return Err(ModelError::BadDimension(format!(
            "distribution has {} states, schedule has {}",
            p0.len(),
            schedule.dim()
        )));
    }
    schedule.covers(cycles)?;
    let mut p = p0.clone();
    for cycle in 0..cycles {
        p = p.step(schedule.matrix_for_cycle(cycle)?);
    }
    Ok(p)
}
