use crate::error::ModelError;
use crate::moments::{cohort_covariance, cohort_mean, CovarianceMatrix};
use crate::occupancy::OccupancyDistribution;
use crate::schedule::TransitionSchedule;
use crate::state::StateSpace;

/// A closed cohort: who starts where, how they move, and for how long.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    state_space: StateSpace,
    schedule: TransitionSchedule,
    initial_counts: Vec<u64>,
    horizon: usize,
    cycle_length: f64,
}

impl CohortSpec {
    pub fn new(
        state_space: StateSpace,
        schedule: TransitionSchedule,
        initial_counts: Vec<u64>,
        horizon: usize,
        cycle_length: f64,
    ) -> Result<Self, ModelError> {
        let s = state_space.len();
        if schedule.dim() != s {
            return Err(ModelError::BadDimension(format!(
                "schedule is {0}x{0}, state space has {s} states",
                schedule.dim()
            )));
        }
        if initial_counts.len() != s {
            return Err(ModelError::BadDimension(format!(
                "{} initial counts for {s} states",
                initial_counts.len()
            )));
        }
        if initial_counts.iter().sum::<u64>() == 0 {
            return Err(ModelError::EmptyCohort);
        }
        schedule.covers(horizon)?;
        Ok(Self {
            state_space,
            schedule,
            initial_counts,
            horizon,
            cycle_length,
        })
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.state_space
    }

    pub fn schedule(&self) -> &TransitionSchedule {
        &self.schedule
    }

    pub fn initial_counts(&self) -> &[u64] {
        &self.initial_counts
    }

    pub fn n0(&self) -> u64 {
        self.initial_counts.iter().sum()
    }

    pub fn num_states(&self) -> usize {
        self.state_space.len()
    }

    /// Number of cycles simulated after `t_0`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Duration of one cycle. Carried as metadata only.
    pub fn cycle_length(&self) -> f64 {
        self.cycle_length
    }

    pub fn initial_occupancy(&self) -> OccupancyDistribution {
        OccupancyDistribution::from_counts(&self.initial_counts).expect("n0 >= 1")
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self, ModelError> {
        self.schedule.covers(horizon)?;
        Ok(Self {
            horizon,
            ..self.clone()
        })
    }

    pub fn with_schedule(&self, schedule: TransitionSchedule) -> Result<Self, ModelError> {
        Self::new(
            self.state_space.clone(),
            schedule,
            self.initial_counts.clone(),
            self.horizon,
            self.cycle_length,
        )
    }
}

/// Exact moments of the counts at a single cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleMoments {
    pub occupancy: OccupancyDistribution,
    pub mean: Vec<f64>,
    pub covariance: CovarianceMatrix,
}

impl CycleMoments {
    pub fn variance(&self) -> Vec<f64> {
        self.covariance.diagonal()
    }
}

/// Exact moments for cycles `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub n0: u64,
    pub cycles: Vec<CycleMoments>,
}

impl MomentTrajectory {
    pub fn num_states(&self) -> usize {
        self.cycles.first().map_or(0, |c| c.mean.len())
    }
}

/// Mean and covariance of the count vector at every cycle of `spec`.
///
/// Initial counts are exact, so every individual's starting state is known
/// and the covariance at cycle 0 is zero. From cycle 1 on, individuals that
/// started in different states follow different occupancy distributions and
/// the counts are a sum of independent multinomials, one per starting group;
/// with a single starting state this is the plain multinomial.
pub fn moment_trajectory(spec: &CohortSpec) -> Result<MomentTrajectory, ModelError> {
    let s = spec.num_states();
    let groups: Vec<(u64, OccupancyDistribution)> = spec
        .initial_counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (c, OccupancyDistribution::point_mass(s, k)))
        .collect();

    let mut states = groups;
    let mut occupancy = spec.initial_occupancy();
    let mut cycles = Vec::with_capacity(spec.horizon() + 1);
    for cycle in 0..=spec.horizon() {
        if cycle > 0 {
            let matrix = spec.schedule().matrix_for_cycle(cycle - 1)?;
            occupancy = occupancy.step(matrix);
            for (_, p) in states.iter_mut() {
                *p = p.step(matrix);
            }
        }
        cycles.push(CycleMoments {
            mean: cohort_mean(spec.n0(), &occupancy)?,
            covariance: grouped_covariance(&states, s)?,
            occupancy: occupancy.clone(),
        });
    }
    Ok(MomentTrajectory {
        n0: spec.n0(),
        cycles,
    })
}

fn grouped_covariance(
    groups: &[(u64, OccupancyDistribution)],
    s: usize,
) -> Result<CovarianceMatrix, ModelError> {
    match groups {
        [(n, p)] => cohort_covariance(*n, p),
        _ => {
            let mut total = vec![0.0; s * s];
            for (n, p) in groups {
                let cov = cohort_covariance(*n, p)?;
                for (acc, x) in total.iter_mut().zip(cov.as_slice()) {
                    *acc += x;
                }
            }
            Ok(CovarianceMatrix::from_vec(s, total))
        }
    }
}
