//! Closed-form distribution and moments of the cohort count vector.
//!
//! With `n0` independent individuals sharing occupancy distribution `p`, the
//! count vector is multinomial: mean `n0·p`, covariance `n0·(diag p − p pᵀ)`.

use crate::error::ModelError;
use crate::lnfact::ln_multinomial_coefficient;
use crate::occupancy::OccupancyDistribution;

/// Persons per state at one cycle.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CohortCount(pub Vec<u64>);

impl CohortCount {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

/// Square covariance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub(crate) fn from_vec(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.dim + v]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks_exact(self.dim)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| factor * x).collect(),
        }
    }
}

/// Probability that one individual realizes the unit indicator `y`:
/// `∏_k p_k^{y_k}` with `0^0 = 1`.
pub fn individual_pmf(p: &OccupancyDistribution, y: &[u8]) -> Result<f64, ModelError> {
    if y.len() != p.len() {
        return Err(ModelError::BadDimension(format!(
            "indicator has {} entries, distribution has {}",
            y.len(),
            p.len()
        )));
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones != 1 || y.iter().any(|&v| v > 1) {
        return Err(ModelError::BadIndicator);
    }
    Ok(p.probs()
        .iter()
        .zip(y)
        .map(|(&pk, &yk)| pk.powi(i32::from(yk)))
        .product())
}

/// Covariance of one individual's occupancy indicator vector.
pub fn individual_covariance(p: &OccupancyDistribution) -> CovarianceMatrix {
    let probs = p.probs();
    let dim = probs.len();
    let mut data = Vec::with_capacity(dim * dim);
    for (k, &pk) in probs.iter().enumerate() {
        for (l, &pl) in probs.iter().enumerate() {
            data.push(if k == l { pk * (1.0 - pk) } else { -pk * pl });
        }
    }
    CovarianceMatrix { dim, data }
}

/// Expected persons per state, `n0 · p`.
pub fn cohort_mean(n0: u64, p: &OccupancyDistribution) -> Result<Vec<f64>, ModelError> {
    if n0 == 0 {
        return Err(ModelError::EmptyCohort);
    }
    let n = n0 as f64;
    Ok(p.probs().iter().map(|&pk| n * pk).collect())
}

/// Covariance of the cohort counts. Computed as `n0` times the individual
/// covariance, so the scaling relation holds bit for bit.
pub fn cohort_covariance(
    n0: u64,
    p: &OccupancyDistribution,
) -> Result<CovarianceMatrix, ModelError> {
    if n0 == 0 {
        return Err(ModelError::EmptyCohort);
    }
    Ok(individual_covariance(p).scaled(n0 as f64))
}

/// Log of the multinomial probability of observing counts `n`.
///
/// Returns `-inf` when a state with zero probability is occupied.
pub fn cohort_log_pmf(
    n0: u64,
    p: &OccupancyDistribution,
    n: &CohortCount,
) -> Result<f64, ModelError> {
    if n0 == 0 {
        return Err(ModelError::EmptyCohort);
    }
    if n.0.len() != p.len() {
        return Err(ModelError::BadDimension(format!(
            "count vector has {} entries, distribution has {}",
            n.0.len(),
            p.len()
        )));
    }
    let total = n.total();
    if total != n0 {
        return Err(ModelError::CountMismatch {
            expected: n0,
            found: total,
        });
    }
    let mut log_kernel = 0.0;
    for (&pk, &nk) in p.probs().iter().zip(&n.0) {
        if nk == 0 {
            continue;
        }
        if pk == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log_kernel += nk as f64 * pk.ln();
    }
    Ok(ln_multinomial_coefficient(&n.0) + log_kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> OccupancyDistribution {
        OccupancyDistribution::new(v.to_vec()).unwrap()
    }

    const CYCLE_ONE: [f64; 4] = [0.71, 0.10, 0.05, 0.14];

    #[test]
    fn indicator_probability() {
        assert_eq!(
            individual_pmf(&dist(&CYCLE_ONE), &[0, 1, 0, 0]).unwrap(),
            0.10
        );
        assert_eq!(individual_pmf(&dist(&[1.0, 0.0]), &[1, 0]).unwrap(), 1.0);
        let p = dist(&[0.3, 0.7]);
        let a = individual_pmf(&p, &[1, 0]).unwrap();
        let b = individual_pmf(&p, &[0, 1]).unwrap();
        assert_eq!(a, 0.3);
        assert_eq!(b, 0.7);
        assert_eq!(a + b, 1.0);
        // Zero-probability state occupied.
        assert_eq!(individual_pmf(&dist(&[1.0, 0.0]), &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn indicator_must_be_unit() {
        let p = dist(&[0.3, 0.7]);
        assert!(matches!(
            individual_pmf(&p, &[1, 1]),
            Err(ModelError::BadIndicator)
        ));
        assert!(matches!(
            individual_pmf(&p, &[0, 0]),
            Err(ModelError::BadIndicator)
        ));
        assert!(matches!(
            individual_pmf(&p, &[2, 0]),
            Err(ModelError::BadIndicator)
        ));
        assert!(matches!(
            individual_pmf(&p, &[1]),
            Err(ModelError::BadDimension(_))
        ));
    }

    /// `E[Y_k Y_l] − E[Y_k] E[Y_l]` by enumerating the `s` possible indicators.
    fn enumerated_individual_covariance(p: &[f64]) -> Vec<Vec<f64>> {
        let s = p.len();
        let mut second = vec![vec![0.0; s]; s];
        for (occupied, &prob) in p.iter().enumerate() {
            // Y_k Y_l = 1 only when k = l = occupied.
            second[occupied][occupied] += prob;
        }
        (0..s)
            .map(|k| (0..s).map(|l| second[k][l] - p[k] * p[l]).collect())
            .collect()
    }

    #[test]
    fn individual_covariance_matches_enumeration() {
        assert_eq!(
            individual_covariance(&dist(&[1.0, 0.0])),
            CovarianceMatrix::zeros(2)
        );
        let half = individual_covariance(&dist(&[0.5, 0.5]));
        assert_eq!(half.to_rows(), vec![vec![0.25, -0.25], vec![-0.25, 0.25]]);

        let cov = individual_covariance(&dist(&CYCLE_ONE));
        let oracle = enumerated_individual_covariance(&CYCLE_ONE);
        for (u, row) in oracle.iter().enumerate() {
            for (v, &want) in row.iter().enumerate() {
                assert!((cov.get(u, v) - want).abs() < 1e-15);
            }
        }
        for (got, want) in cov.diagonal().iter().zip([0.2059, 0.09, 0.0475, 0.1204]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((cov.get(0, 1) + 0.071).abs() < 1e-15);
    }

    #[test]
    fn cohort_mean_values() {
        let m = cohort_mean(10_000, &dist(&CYCLE_ONE)).unwrap();
        for (got, want) in m.iter().zip([7100.0, 1000.0, 500.0, 1400.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(cohort_mean(1, &p).unwrap(), p.probs());
        let third = 1.0 / 3.0;
        let m = cohort_mean(6, &dist(&[third, third, third])).unwrap();
        for x in m {
            assert!((x - 2.0).abs() < 1e-14);
        }
        assert!(matches!(cohort_mean(0, &p), Err(ModelError::EmptyCohort)));
    }

    #[test]
    fn cohort_covariance_values() {
        let cov = cohort_covariance(10_000, &dist(&CYCLE_ONE)).unwrap();
        for (got, want) in cov.diagonal().iter().zip([2059.0, 900.0, 475.0, 1204.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!((cov.get(0, 1) + 710.0).abs() < 1e-9);
        assert_eq!(
            cohort_covariance(5, &dist(&[1.0, 0.0, 0.0])).unwrap(),
            CovarianceMatrix::zeros(3)
        );
    }

    #[test]
    fn cohort_variance_by_brute_force() {
        // n0 = 4, p = [0.5, 0.5]: enumerate all 2^4 individual outcomes.
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for mask in 0u32..16 {
            let in_first = f64::from(mask.count_ones());
            let prob = 0.5f64.powi(4);
            sum += prob * in_first;
            sum_sq += prob * in_first * in_first;
        }
        let var = sum_sq - sum * sum;
        assert_eq!(var, 1.0);
        let cov = cohort_covariance(4, &dist(&[0.5, 0.5])).unwrap();
        assert_eq!(cov.diagonal(), vec![var, var]);
    }

    #[test]
    fn log_pmf_cases() {
        let p = dist(&CYCLE_ONE);
        let got = cohort_log_pmf(1, &p, &CohortCount(vec![0, 1, 0, 0])).unwrap();
        assert!((got - 0.10f64.ln()).abs() < 1e-15);

        // Two of the four equally likely joint outcomes give (1, 1).
        let got = cohort_log_pmf(2, &dist(&[0.5, 0.5]), &CohortCount(vec![1, 1])).unwrap();
        assert!((got - (2.0f64 / 4.0).ln()).abs() < 1e-15);

        let p = dist(&[0.3, 0.7]);
        let total: f64 = (0..=5u64)
            .map(|k| {
                cohort_log_pmf(5, &p, &CohortCount(vec![k, 5 - k]))
                    .unwrap()
                    .exp()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_pmf_degenerate_and_errors() {
        let p = dist(&[1.0, 0.0]);
        assert_eq!(
            cohort_log_pmf(3, &p, &CohortCount(vec![3, 0])).unwrap(),
            0.0
        );
        assert_eq!(
            cohort_log_pmf(3, &p, &CohortCount(vec![2, 1])).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(
            cohort_log_pmf(3, &p, &CohortCount(vec![2, 2])),
            Err(ModelError::CountMismatch {
                expected: 3,
                found: 4
            })
        ));
    }

    #[test]
    fn log_pmf_large_cohort_is_finite() {
        let p = dist(&CYCLE_ONE);
        let lp = cohort_log_pmf(10_000, &p, &CohortCount(vec![7100, 1000, 500, 1400])).unwrap();
        assert!(lp.is_finite() && lp < 0.0);
    }
}
