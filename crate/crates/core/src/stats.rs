//! Chi-square and dispersion helpers shared by the simulator, the CLI
//! summary and the verification suite.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
}

/// Pearson goodness-of-fit statistic and p-value for observed counts
/// against per-bin expected counts.
///
/// Panics if lengths differ, fewer than two bins are given, or any
/// expected count is non-positive.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len(), "bin count mismatch");
    assert!(observed.len() >= 2, "need at least two bins");
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&obs, &exp)| {
            assert!(exp > 0.0, "expected counts must be positive");
            let diff = obs as f64 - exp;
            diff * diff / exp
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    let dist = ChiSquared::new(dof).expect("valid degrees of freedom");
    ChiSquareResult {
        statistic,
        degrees_of_freedom: dof,
        p_value: 1.0 - dist.cdf(statistic),
    }
}

/// Goodness of fit against the uniform distribution over the given bins.
pub fn chi_square_uniform(observed: &[u64]) -> ChiSquareResult {
    let total: u64 = observed.iter().sum();
    let expected = vec![total as f64 / observed.len() as f64; observed.len()];
    chi_square_gof(observed, &expected)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divisor n).
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Coefficient of variation: population std over mean. Zero for an
/// empty series or a zero mean.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let mu = mean(values);
    if mu == 0.0 {
        return 0.0;
    }
    population_std(values) / mu
}
