//! Log-factorials and multinomial coefficients in log space.

/// Below this, `n!` is an exactly accumulated product that fits in `f64`.
const DIRECT_LIMIT: u64 = 170;

/// `ln(n!)`.
///
/// Exact products up to 170!, then the Stirling series for `ln Γ(n + 1)`
/// truncated after the `1/n^7` term, which is accurate to well below one ulp
/// from that point on.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= DIRECT_LIMIT {
        return (2..=n).map(|k| k as f64).product::<f64>().ln();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    x * x.ln() - x + 0.5 * (std::f64::consts::TAU * x).ln() + series
}

/// `ln( n! / (k_1! k_2! ... k_s!) )` with `n = Σ k_i`.
pub fn ln_multinomial_coefficient(parts: &[u64]) -> f64 {
    let n: u64 = parts.iter().sum();
    ln_factorial(n) - parts.iter().map(|&k| ln_factorial(k)).sum::<f64>()
}
