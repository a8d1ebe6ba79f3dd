//! Dirichlet–multinomial estimation of transition probabilities.
//!
//! Each row of a time-invariant transition matrix gets its own Dirichlet
//! prior. Observed one-cycle transitions out of a state are multinomial in
//! that row, so the posterior is Dirichlet with the counts added to the
//! concentration parameters.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::microsim::IndividualPath;
use crate::schedule::{TransitionMatrix, TransitionSchedule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("concentration ({row}, {col}) = {value} must be positive and finite")]
    NonPositiveAlpha { row: usize, col: usize, value: f64 },
    #[error(
        "paths come from a schedule with {0} matrices; only time-invariant models can be pooled"
    )]
    TimeVaryingUnsupported(usize),
    #[error("path {path} visits state {state}, outside 0..{states}")]
    StateOutOfRange {
        path: usize,
        state: usize,
        states: usize,
    },
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// One Dirichlet per origin state, concentration parameters row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletRows {
    dim: usize,
    alphas: Vec<f64>,
}

impl DirichletRows {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, BayesError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(BayesError::DimensionMismatch("no rows".into()));
        }
        let mut alphas = Vec::with_capacity(dim * dim);
        for (row, values) in rows.iter().enumerate() {
            if values.len() != dim {
                return Err(BayesError::DimensionMismatch(format!(
                    "row {row} has {} entries, expected {dim}",
                    values.len()
                )));
            }
            for (col, &value) in values.iter().enumerate() {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(BayesError::NonPositiveAlpha { row, col, value });
                }
            }
            alphas.extend_from_slice(values);
        }
        Ok(Self { dim, alphas })
    }

    /// All concentrations equal to 1: uniform over each row's simplex.
    pub fn uniform(dim: usize) -> Self {
        Self {
            dim,
            alphas: vec![1.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.alphas[from * self.dim + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.alphas[from * self.dim..(from + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.alphas
            .chunks_exact(self.dim)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Posterior mean of row `from`: `α_l / Σ α`.
    pub fn row_mean(&self, from: usize) -> Vec<f64> {
        let row = self.row(from);
        let total: f64 = row.iter().sum();
        row.iter().map(|&a| a / total).collect()
    }

    /// Marginal variance of each entry of row `from`:
    /// `α_l (Σ − α_l) / (Σ² (Σ + 1))`.
    pub fn row_variance(&self, from: usize) -> Vec<f64> {
        let row = self.row(from);
        let total: f64 = row.iter().sum();
        row.iter()
            .map(|&a| a * (total - a) / (total * total * (total + 1.0)))
            .collect()
    }
}

/// Observed one-cycle transitions, `counts[from][to]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    dim: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            counts: vec![0; dim * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, BayesError> {
        let dim = rows.len();
        let mut counts = Vec::with_capacity(dim * dim);
        for (row, values) in rows.iter().enumerate() {
            if values.len() != dim {
                return Err(BayesError::DimensionMismatch(format!(
                    "row {row} has {} entries, expected {dim}",
                    values.len()
                )));
            }
            counts.extend_from_slice(values);
        }
        Ok(Self { dim, counts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, from: usize, to: usize) -> u64 {
        self.counts[from * self.dim + to]
    }

    pub fn add(&mut self, from: usize, to: usize, n: u64) {
        self.counts[from * self.dim + to] += n;
    }

    pub fn row(&self, from: usize) -> &[u64] {
        &self.counts[from * self.dim..(from + 1) * self.dim]
    }

    /// Person-cycles observed departing `from`.
    pub fn departures(&self, from: usize) -> u64 {
        self.row(from).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks_exact(self.dim)
            .map(<[u64]>::to_vec)
            .collect()
    }
}

/// Paths observed under a single model, with the facts needed to pool them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub num_states: usize,
    /// Number of matrices in the schedule that generated the paths.
    pub schedule_len: usize,
    pub paths: Vec<IndividualPath>,
}

/// Tallies consecutive `(from, to)` pairs over every path.
pub fn count_transitions(set: &PathSet) -> Result<TransitionCounts, BayesError> {
    if set.schedule_len > 1 {
        return Err(BayesError::TimeVaryingUnsupported(set.schedule_len));
    }
    let s = set.num_states;
    let mut counts = TransitionCounts::zeros(s);
    for (i, path) in set.paths.iter().enumerate() {
        if let Some(&bad) = path.states.iter().find(|&&k| k as usize >= s) {
            return Err(BayesError::StateOutOfRange {
                path: i,
                state: bad as usize,
                states: s,
            });
        }
        for (from, to) in path.transitions() {
            counts.add(from, to, 1);
        }
    }
    Ok(counts)
}

/// Conjugate update: posterior concentration = prior + counts.
pub fn posterior_update(
    prior: &DirichletRows,
    data: &TransitionCounts,
) -> Result<DirichletRows, BayesError> {
    if prior.dim != data.dim {
        return Err(BayesError::DimensionMismatch(format!(
            "prior is {0}x{0}, counts are {1}x{1}",
            prior.dim, data.dim
        )));
    }
    let alphas = prior
        .alphas
        .iter()
        .zip(&data.counts)
        .map(|(&a, &n)| a + n as f64)
        .collect();
    Ok(DirichletRows {
        dim: prior.dim,
        alphas,
    })
}

/// The matrix of row-wise Dirichlet means, held for every cycle.
pub fn posterior_mean(rows: &DirichletRows) -> TransitionSchedule {
    let data = (0..rows.dim).flat_map(|k| rows.row_mean(k)).collect();
    TransitionSchedule::time_invariant(TransitionMatrix::from_raw_parts(rows.dim, data))
}

/// Draws `count` transition matrices, each row from its Dirichlet.
///
/// Rows are normalized gamma variates, formed in log space so that rows
/// with very small concentrations do not underflow to all zeros.
pub fn sample_matrices(
    rows: &DirichletRows,
    count: usize,
    seed: u64,
) -> Result<Vec<TransitionMatrix>, BayesError> {
    if count == 0 {
        return Err(BayesError::NoSamples);
    }
    let samplers: Vec<LogGamma> = rows.alphas.iter().map(|&a| LogGamma::new(a)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rows.dim;
    let mut out = Vec::with_capacity(count);
    let mut logs = vec![0.0; dim];
    for _ in 0..count {
        let mut data = Vec::with_capacity(dim * dim);
        for k in 0..dim {
            for (l, slot) in logs.iter_mut().enumerate() {
                *slot = samplers[k * dim + l].sample(&mut rng);
            }
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logs.iter().map(|&x| (x - top).exp()).collect();
            let total: f64 = weights.iter().sum();
            data.extend(weights.iter().map(|&w| w / total));
        }
        out.push(TransitionMatrix::from_raw_parts(dim, data));
    }
    Ok(out)
}

/// Samples `ln X` for `X ~ Gamma(shape, 1)`.
struct LogGamma {
    gamma: Gamma<f64>,
    /// `Some(1/shape)` when `shape < 1`, sampled as
    /// `ln Gamma(shape + 1) + ln(U) / shape`.
    boost: Option<f64>,
}

impl LogGamma {
    fn new(shape: f64) -> Self {
        let (gamma_shape, boost) = if shape < 1.0 {
            (shape + 1.0, Some(1.0 / shape))
        } else {
            (shape, None)
        };
        Self {
            gamma: Gamma::new(gamma_shape, 1.0).expect("positive finite shape"),
            boost,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let base = self.gamma.sample(rng).ln();
        match self.boost {
            None => base,
            Some(inv_shape) => {
                // Uniform on (0, 1].
                let u: f64 = 1.0 - rng.random::<f64>();
                base + u.ln() * inv_shape
            }
        }
    }
}
