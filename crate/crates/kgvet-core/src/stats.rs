//! Small statistics helpers shared by the evaluation and tiering code.

use crate::num;

/// Arithmetic mean; 0.0 for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by n, not n-1); 0.0 for an empty
/// slice.
///
/// Both seed-level accuracy spread and distractor-similarity spread use the
/// population form: the values at hand are the entire population of interest
/// (all runs, all three distractors), not a sample from a larger one.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    num::sqrt(var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_std_basics() {
        assert_eq!(mean(&[]), 0.0);
        assert_eq!(mean(&[2.0, 4.0]), 3.0);
        assert_eq!(population_std(&[5.0, 5.0, 5.0]), 0.0);
    }

    #[test]
    fn population_std_divides_by_n() {
        // {0.5, 0.5, 0.8}: mean 0.6, variance (0.01 + 0.01 + 0.04) / 3 = 0.02.
        let s = population_std(&[0.5, 0.5, 0.8]);
        assert!((s - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((s - 0.1414213562373095).abs() < 1e-12);
    }
}
