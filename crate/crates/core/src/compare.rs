//! Empirical-versus-exact moment comparison.

use thiserror::Error;

use crate::cohort::MomentTrajectory;
use crate::microsim::ReplicationSummary;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Pass/fail bands for [`compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareThresholds {
    /// Largest accepted |z| on gated cells.
    pub z_max: f64,
    /// Accepted empirical/analytic variance ratio, inclusive.
    pub ratio_band: (f64, f64),
    /// Cells with analytic variance below this (persons²) are not gated.
    pub variance_floor: f64,
    /// Secondary |z| bound applied to the fraction of all cells.
    pub z_strict: f64,
    pub min_fraction_strict: f64,
}

impl Default for CompareThresholds {
    fn default() -> Self {
        Self {
            z_max: 4.0,
            ratio_band: (0.85, 1.15),
            variance_floor: 100.0,
            z_strict: 3.0,
            min_fraction_strict: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellComparison {
    pub cycle: usize,
    pub state: usize,
    pub analytic_mean: f64,
    pub empirical_mean: f64,
    pub analytic_variance: f64,
    pub empirical_variance: f64,
    /// `(empirical − analytic) / sqrt(analytic_variance / r)`. A degenerate
    /// cell scores 0 when its mean matches and ±∞ otherwise.
    pub z: f64,
    /// Set when the analytic variance reaches the floor.
    pub variance_ratio: Option<f64>,
    /// Analytic variance is zero: the count is deterministic.
    pub degenerate: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub replications: usize,
    pub thresholds: CompareThresholds,
    pub cells: Vec<CellComparison>,
    pub max_abs_z: f64,
    /// Share of cells with |z| ≤ `z_strict`; 1 when there are none.
    pub fraction_within_strict: f64,
    pub ratio_range: Option<(f64, f64)>,
    pub passed: bool,
}

impl ComparisonReport {
    pub fn failures(&self) -> impl Iterator<Item = &CellComparison> {
        self.cells.iter().filter(|c| !c.passed)
    }

    pub fn cell(&self, cycle: usize, state: usize) -> Option<&CellComparison> {
        self.cells
            .iter()
            .find(|c| c.cycle == cycle && c.state == state)
    }
}

pub fn compare(
    summary: &ReplicationSummary,
    trajectory: &MomentTrajectory,
    thresholds: CompareThresholds,
) -> Result<ComparisonReport, CompareError> {
    let cycles = trajectory.cycles.len();
    if summary.empirical_mean.len() != cycles || summary.empirical_variance.len() != cycles {
        return Err(CompareError::DimensionMismatch(format!(
            "simulation has {} cycles, exact trajectory has {cycles}",
            summary.empirical_mean.len()
        )));
    }
    if summary.n0 != trajectory.n0 {
        return Err(CompareError::DimensionMismatch(format!(
            "simulated cohort has {} persons, exact trajectory {}",
            summary.n0, trajectory.n0
        )));
    }
    let s = trajectory.num_states();
    let r = summary.replications as f64;
    // Analytic variances at or below this are rounding noise around zero.
    let zero_variance = 1e-12 * trajectory.n0 as f64;
    let mean_tol = 1e-9 * trajectory.n0 as f64;

    let mut cells = Vec::with_capacity(cycles * s);
    for (z, exact) in trajectory.cycles.iter().enumerate() {
        let emp_mean = &summary.empirical_mean[z];
        let emp_var = &summary.empirical_variance[z];
        if emp_mean.len() != s || emp_var.len() != s {
            return Err(CompareError::DimensionMismatch(format!(
                "cycle {z}: simulation has {} states, exact trajectory has {s}",
                emp_mean.len()
            )));
        }
        let variance = exact.variance();
        for k in 0..s {
            let analytic_variance = variance[k];
            let degenerate = analytic_variance <= zero_variance;
            let mut cell = CellComparison {
                cycle: z,
                state: k,
                analytic_mean: exact.mean[k],
                empirical_mean: emp_mean[k],
                analytic_variance,
                empirical_variance: emp_var[k],
                z: 0.0,
                variance_ratio: None,
                degenerate,
                passed: true,
            };
            if degenerate {
                let diff = cell.empirical_mean - cell.analytic_mean;
                if diff.abs() > mean_tol {
                    cell.z = f64::INFINITY.copysign(diff);
                }
                cell.passed = cell.empirical_variance == 0.0 && cell.z == 0.0;
            } else {
                let score =
                    (cell.empirical_mean - cell.analytic_mean) / (analytic_variance / r).sqrt();
                cell.z = score;
                if analytic_variance >= thresholds.variance_floor {
                    let ratio = cell.empirical_variance / analytic_variance;
                    cell.variance_ratio = Some(ratio);
                    let (lo, hi) = thresholds.ratio_band;
                    cell.passed = score.abs() <= thresholds.z_max && (lo..=hi).contains(&ratio);
                }
            }
            cells.push(cell);
        }
    }

    let scores: Vec<f64> = cells.iter().map(|c| c.z.abs()).collect();
    let max_abs_z = scores.iter().copied().fold(0.0, f64::max);
    let fraction_within_strict = if scores.is_empty() {
        1.0
    } else {
        scores.iter().filter(|&&a| a <= thresholds.z_strict).count() as f64 / scores.len() as f64
    };
    let ratio_range =
        cells
            .iter()
            .filter_map(|c| c.variance_ratio)
            .fold(None, |acc: Option<(f64, f64)>, x| match acc {
                None => Some((x, x)),
                Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
            });
    let passed =
        cells.iter().all(|c| c.passed) && fraction_within_strict >= thresholds.min_fraction_strict;

    Ok(ComparisonReport {
        replications: summary.replications,
        thresholds,
        cells,
        max_abs_z,
        fraction_within_strict,
        ratio_range,
        passed,
    })
}
