//! Exact distribution and moments of closed-cohort Markov state-transition
//! models.
//!
//! A cohort of `n0` independent individuals moving through `s` states under
//! a row-stochastic transition schedule has, at each cycle, a multinomial
//! count vector. This crate computes that distribution and its mean and
//! covariance in closed form ([`moments`], [`cohort`]), checks them against
//! an individual-level microsimulation ([`microsim`]), and updates
//! transition probabilities from observed paths with Dirichlet priors
//! ([`bayes`]). [`modelfile`] reads and writes the text model format.

pub mod bayes;
pub mod cohort;
pub mod compare;
pub mod error;
pub mod lnfact;
pub mod microsim;
pub mod modelfile;
pub mod moments;
pub mod occupancy;
pub mod reference;
pub mod schedule;
pub mod state;

pub use cohort::{moment_trajectory, CohortSpec, CycleMoments, MomentTrajectory};
pub use error::ModelError;
pub use moments::{
    cohort_covariance, cohort_log_pmf, cohort_mean, individual_covariance, individual_pmf,
    CohortCount, CovarianceMatrix,
};
pub use occupancy::{propagate_occupancy, OccupancyDistribution};
pub use schedule::{
    validate_schedule, validate_schedule_with, RawEntry, RowRepair, ScheduleOptions,
    TransitionMatrix, TransitionSchedule, STOCHASTIC_TOL,
};
pub use state::StateSpace;
