//! Individual-level microsimulation of a closed cohort.
//!
//! Every person carries their own state and draws one categorical transition
//! per cycle; cohort counts are the per-cycle sum of occupancy indicators.
//! Replications run independently (optionally in parallel) and each one is
//! seeded from `(master_seed, replication_index)`, so results do not depend
//! on how work is scheduled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cohort::CohortSpec;
use crate::error::ModelError;
use crate::schedule::TransitionMatrix;

/// Identifies the generator and seed derivation in run metadata.
pub const RNG_ID: &str = "chacha8(rand_chacha-0.9)+splitmix64-seed-derivation";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("at least 2 replications are required, got {0}")]
    InsufficientReplications(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("could not start worker pool: {0}")]
    WorkerPool(String),
}

/// Seed for replication `index` under `master_seed`.
///
/// SplitMix64 finalizer over a Weyl sequence: distinct indices map to
/// well-separated, uncorrelated seeds.
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut z = master_seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// State index occupied by one individual at cycles `0..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndividualPath {
    pub states: Vec<u32>,
}

impl IndividualPath {
    pub fn initial_state(&self) -> Option<usize> {
        self.states.first().map(|&s| s as usize)
    }

    /// Consecutive `(from, to)` pairs.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states
            .windows(2)
            .map(|w| (w[0] as usize, w[1] as usize))
    }
}

/// Persons per state at each cycle of one simulated cohort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTrajectory {
    pub counts: Vec<Vec<u64>>,
}

impl CountTrajectory {
    pub fn cycles(&self) -> usize {
        self.counts.len()
    }

    pub fn at(&self, cycle: usize) -> &[u64] {
        &self.counts[cycle]
    }

    /// Counts of one state over time.
    pub fn state_series(&self, state: usize) -> Vec<u64> {
        self.counts.iter().map(|row| row[state]).collect()
    }
}

/// Cumulative row probabilities for inverse-CDF sampling.
struct Sampler {
    dim: usize,
    cumulative: Vec<f64>,
    /// Last state with positive probability per row, used when a uniform
    /// lands above a cumulative total that rounded below 1.
    fallback: Vec<usize>,
    absorbing: Vec<bool>,
}

impl Sampler {
    fn new(matrix: &TransitionMatrix) -> Self {
        let dim = matrix.dim();
        let mut cumulative = Vec::with_capacity(dim * dim);
        let mut fallback = Vec::with_capacity(dim);
        for row in matrix.rows() {
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumulative.push(acc);
            }
            let last = row.iter().rposition(|&p| p > 0.0).expect("row sums to 1");
            fallback.push(last);
        }
        let absorbing = (0..dim).map(|k| matrix.is_absorbing(k)).collect();
        Self {
            dim,
            cumulative,
            fallback,
            absorbing,
        }
    }

    #[inline]
    fn next_state<R: Rng>(&self, from: usize, rng: &mut R) -> usize {
        if self.absorbing[from] {
            return from;
        }
        let u: f64 = rng.random();
        let row = &self.cumulative[from * self.dim..(from + 1) * self.dim];
        // Zero-probability states repeat the previous cumulative value and so
        // can never be the first entry exceeding `u`.
        row.iter()
            .position(|&c| u < c)
            .unwrap_or(self.fallback[from])
    }
}

fn run_cohort(spec: &CohortSpec, seed: u64, keep_paths: bool) -> RunResult {
    let s = spec.num_states();
    let horizon = spec.horizon();
    let samplers: Vec<Sampler> = spec
        .schedule()
        .matrices()
        .iter()
        .take(horizon.max(1))
        .map(Sampler::new)
        .collect();
    spec.schedule().covers(horizon)?;

    // Individuals are laid out by initial state in label order.
    let mut current: Vec<usize> = spec
        .initial_counts()
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k, c as usize))
        .collect();
    let mut paths = keep_paths.then(|| {
        current
            .iter()
            .map(|&k| {
                let mut states = Vec::with_capacity(horizon + 1);
                states.push(k as u32);
                IndividualPath { states }
            })
            .collect::<Vec<_>>()
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(horizon + 1);
    counts.push(spec.initial_counts().to_vec());
    for cycle in 0..horizon {
        let sampler = &samplers[cycle.min(samplers.len() - 1)];
        let mut tally = vec![0u64; s];
        for state in current.iter_mut() {
            *state = sampler.next_state(*state, &mut rng);
            tally[*state] += 1;
        }
        if let Some(paths) = paths.as_mut() {
            for (path, &state) in paths.iter_mut().zip(&current) {
                path.states.push(state as u32);
            }
        }
        counts.push(tally);
    }
    Ok((CountTrajectory { counts }, paths))
}

/// One cohort realization: counts per state at cycles `0..=horizon`.
pub fn simulate_cohort(spec: &CohortSpec, seed: u64) -> Result<CountTrajectory, ModelError> {
    run_cohort(spec, seed, false).map(|(counts, _)| counts)
}

/// [`simulate_cohort`] that also returns every individual's path. Uses the
/// same random stream, so the counts are identical.
pub fn simulate_cohort_with_paths(
    spec: &CohortSpec,
    seed: u64,
) -> Result<(CountTrajectory, Vec<IndividualPath>), ModelError> {
    run_cohort(spec, seed, true).map(|(counts, paths)| (counts, paths.expect("requested")))
}

/// Empirical per-cycle moments across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub replications: usize,
    pub seed: u64,
    pub n0: u64,
    /// `(horizon + 1) × s`, persons.
    pub empirical_mean: Vec<Vec<f64>>,
    /// `(horizon + 1) × s`, persons², divisor `r − 1`.
    pub empirical_variance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReplicateOptions {
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
    /// Keep every individual's path from every replication.
    pub store_paths: bool,
}

/// Output of [`replicate_with`]. `paths[i]` holds replication `i`'s paths
/// when they were requested.
#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub summary: ReplicationSummary,
    pub paths: Option<Vec<Vec<IndividualPath>>>,
}

pub fn replicate(
    spec: &CohortSpec,
    replications: usize,
    master_seed: u64,
) -> Result<ReplicationSummary, SimError> {
    replicate_with(spec, replications, master_seed, ReplicateOptions::default()).map(|o| o.summary)
}

pub fn replicate_with(
    spec: &CohortSpec,
    replications: usize,
    master_seed: u64,
    opts: ReplicateOptions,
) -> Result<ReplicationOutput, SimError> {
    if replications < 2 {
        return Err(SimError::InsufficientReplications(replications));
    }
    let run = |i: usize| {
        run_cohort(
            spec,
            replication_seed(master_seed, i as u64),
            opts.store_paths,
        )
    };
    let runs = run_all(replications, opts.workers, run)?;

    let cycles = spec.horizon() + 1;
    let s = spec.num_states();
    let mut sums = vec![vec![0u128; s]; cycles];
    let mut sums_sq = vec![vec![0u128; s]; cycles];
    for (trajectory, _) in &runs {
        for (z, row) in trajectory.counts.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                let c = u128::from(c);
                sums[z][k] += c;
                sums_sq[z][k] += c * c;
            }
        }
    }

    // Integer sums are exact, so the moments do not depend on the order in
    // which replications finished.
    let r = replications as u128;
    let empirical_mean = sums
        .iter()
        .map(|row| row.iter().map(|&t| t as f64 / r as f64).collect())
        .collect();
    let empirical_variance = sums
        .iter()
        .zip(&sums_sq)
        .map(|(row, row_sq)| {
            row.iter()
                .zip(row_sq)
                .map(|(&t, &q)| (r * q - t * t) as f64 / (r * (r - 1)) as f64)
                .collect()
        })
        .collect();

    let paths = opts.store_paths.then(|| {
        runs.into_iter()
            .map(|(_, p)| p.expect("requested"))
            .collect()
    });
    Ok(ReplicationOutput {
        summary: ReplicationSummary {
            replications,
            seed: master_seed,
            n0: spec.n0(),
            empirical_mean,
            empirical_variance,
        },
        paths,
    })
}

type RunOutput = (CountTrajectory, Option<Vec<IndividualPath>>);
type RunResult = Result<RunOutput, ModelError>;

#[cfg(feature = "parallel")]
fn run_all<F>(
    replications: usize,
    workers: Option<usize>,
    run: F,
) -> Result<Vec<RunOutput>, SimError>
where
    F: Fn(usize) -> RunResult + Sync,
{
    use rayon::prelude::*;
    let collect = || {
        (0..replications)
            .into_par_iter()
            .map(&run)
            .collect::<Result<Vec<_>, _>>()
    };
    let runs = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SimError::WorkerPool(e.to_string()))?
            .install(collect),
        None => collect(),
    };
    Ok(runs?)
}

#[cfg(not(feature = "parallel"))]
fn run_all<F>(
    replications: usize,
    _workers: Option<usize>,
    run: F,
) -> Result<Vec<RunOutput>, SimError>
where
    F: Fn(usize) -> RunResult,
{
    Ok((0..replications).map(run).collect::<Result<Vec<_>, _>>()?)
}
