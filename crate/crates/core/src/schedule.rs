//! Row-stochastic transition matrices and per-cycle schedules.

use crate::error::ModelError;

/// Absolute tolerance on row sums of stochastic matrices and distributions.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// One cell of a matrix as written by a modeller: either a probability or a
/// diagonal left to be completed as the row residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawEntry {
    Given(f64),
    Implied,
}

/// A square row-stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from explicit rows, rejecting anything that is not
    /// row-stochastic within [`STOCHASTIC_TOL`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let raw: Vec<Vec<RawEntry>> = rows
            .iter()
            .map(|r| r.iter().copied().map(RawEntry::Given).collect())
            .collect();
        let schedule = validate_schedule(&[raw], rows.len(), true)?;
        Ok(schedule.matrices.into_iter().next().expect("one matrix"))
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.dim + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.dim..(from + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// A state is absorbing when no probability mass leaves it.
    pub fn is_absorbing(&self, state: usize) -> bool {
        self.row(state)
            .iter()
            .enumerate()
            .all(|(to, &p)| to == state || p == 0.0)
    }

    /// Row vector times matrix: `p · P`.
    pub fn apply_left(&self, p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(p.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (from, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (acc, &prob) in out.iter_mut().zip(self.row(from)) {
                *acc += mass * prob;
            }
        }
        out
    }

    pub(crate) fn from_raw_parts(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }
}

/// Per-cycle transition matrices. Cycle `c` (zero-based) moves the cohort
/// from `t_c` to `t_{c+1}` using `matrices[c]`; with `hold_last` the final
/// matrix governs every later cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSchedule {
    matrices: Vec<TransitionMatrix>,
    hold_last: bool,
}

impl TransitionSchedule {
    pub fn new(matrices: Vec<TransitionMatrix>, hold_last: bool) -> Result<Self, ModelError> {
        let first = matrices.first().ok_or(ModelError::EmptySchedule)?;
        let dim = first.dim();
        if let Some((i, m)) = matrices.iter().enumerate().find(|(_, m)| m.dim() != dim) {
            return Err(ModelError::BadDimension(format!(
                "matrix {i} is {}x{}, matrix 0 is {dim}x{dim}",
                m.dim(),
                m.dim()
            )));
        }
        Ok(Self {
            matrices,
            hold_last,
        })
    }

    /// A single matrix held for every cycle.
    pub fn time_invariant(matrix: TransitionMatrix) -> Self {
        Self {
            matrices: vec![matrix],
            hold_last: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn hold_last(&self) -> bool {
        self.hold_last
    }

    pub fn matrices(&self) -> &[TransitionMatrix] {
        &self.matrices
    }

    pub fn is_time_invariant(&self) -> bool {
        self.matrices.len() == 1 && self.hold_last
    }

    /// The matrix applied during cycle `cycle` (zero-based).
    pub fn matrix_for_cycle(&self, cycle: usize) -> Result<&TransitionMatrix, ModelError> {
        match self.matrices.get(cycle) {
            Some(m) => Ok(m),
            None if self.hold_last => Ok(self.matrices.last().expect("non-empty")),
            None => Err(ModelError::HorizonExceedsSchedule {
                horizon: cycle + 1,
                available: self.matrices.len(),
            }),
        }
    }

    /// Checks that `horizon` cycles can be run.
    pub fn covers(&self, horizon: usize) -> Result<(), ModelError> {
        if self.hold_last || horizon <= self.matrices.len() {
            Ok(())
        } else {
            Err(ModelError::HorizonExceedsSchedule {
                horizon,
                available: self.matrices.len(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScheduleOptions {
    pub hold_last: bool,
    /// Rescale failing rows instead of rejecting them.
    pub renormalize_rows: bool,
}

/// A row rescaled under [`ScheduleOptions::renormalize_rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowRepair {
    pub matrix: usize,
    pub row: usize,
    pub original_sum: f64,
}

/// Completes implied diagonals and checks every row is stochastic.
pub fn validate_schedule(
    raw: &[Vec<Vec<RawEntry>>],
    states: usize,
    hold_last: bool,
) -> Result<TransitionSchedule, ModelError> {
    let opts = ScheduleOptions {
        hold_last,
        renormalize_rows: false,
    };
    validate_schedule_with(raw, states, opts).map(|(schedule, _)| schedule)
}

/// [`validate_schedule`] with the option of renormalizing bad rows. Every
/// rescaled row is reported back so callers can warn about it.
pub fn validate_schedule_with(
    raw: &[Vec<Vec<RawEntry>>],
    states: usize,
    opts: ScheduleOptions,
) -> Result<(TransitionSchedule, Vec<RowRepair>), ModelError> {
    if raw.is_empty() {
        return Err(ModelError::EmptySchedule);
    }
    if states == 0 {
        return Err(ModelError::EmptyStateSpace);
    }
    let mut repairs = Vec::new();
    let mut matrices = Vec::with_capacity(raw.len());
    for (m, rows) in raw.iter().enumerate() {
        if rows.len() != states {
            return Err(ModelError::BadDimension(format!(
                "matrix {m} has {} rows, expected {states}",
                rows.len()
            )));
        }
        let mut data = Vec::with_capacity(states * states);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != states {
                return Err(ModelError::BadDimension(format!(
                    "matrix {m}, row {r} has {} entries, expected {states}",
                    row.len()
                )));
            }
            let completed = complete_row(m, r, row, opts.renormalize_rows, &mut repairs)?;
            data.extend(completed);
        }
        matrices.push(TransitionMatrix::from_raw_parts(states, data));
    }
    let schedule = TransitionSchedule::new(matrices, opts.hold_last)?;
    Ok((schedule, repairs))
}

fn complete_row(
    m: usize,
    r: usize,
    row: &[RawEntry],
    renormalize: bool,
    repairs: &mut Vec<RowRepair>,
) -> Result<Vec<f64>, ModelError> {
    let implied = row.get(r) == Some(&RawEntry::Implied);
    let mut values = Vec::with_capacity(row.len());
    for (c, entry) in row.iter().enumerate() {
        match *entry {
            RawEntry::Implied if c == r => values.push(0.0),
            RawEntry::Implied => {
                return Err(ModelError::ImpliedOffDiagonal {
                    matrix: m,
                    row: r,
                    col: c,
                });
            }
            RawEntry::Given(value) => {
                // An oversized entry in a row with an implied diagonal is
                // reported as a negative residual below.
                let upper = if implied { f64::INFINITY } else { 1.0 };
                if !(0.0..=upper).contains(&value) {
                    return Err(ModelError::EntryOutOfRange {
                        matrix: m,
                        row: r,
                        col: c,
                        value,
                    });
                }
                values.push(value);
            }
        }
    }

    if implied {
        let off: f64 = values.iter().sum();
        if off > 1.0 + STOCHASTIC_TOL {
            if !renormalize {
                return Err(ModelError::NegativeResidual {
                    matrix: m,
                    row: r,
                    sum: off,
                });
            }
            repairs.push(RowRepair {
                matrix: m,
                row: r,
                original_sum: off,
            });
            values.iter_mut().for_each(|v| *v /= off);
        } else {
            values[r] = (1.0 - off).max(0.0);
        }
        return Ok(values);
    }

    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        if !renormalize || sum == 0.0 {
            return Err(ModelError::NotStochastic {
                matrix: m,
                row: r,
                sum,
            });
        }
        repairs.push(RowRepair {
            matrix: m,
            row: r,
            original_sum: sum,
        });
        values.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(values)
}
