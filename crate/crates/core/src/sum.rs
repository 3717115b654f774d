//! Fixed-order reductions.
//!
//! Every mean and variance in the crate goes through these helpers so that
//! results depend only on the input order, never on how work was scheduled.

const BLOCK: usize = 16;

/// Pairwise (cascade) summation with a fixed split, `O(log n)` error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Population variance (divide by `len`) by the two-pass formula.
pub fn population_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    let mut dev = alloc::vec::Vec::with_capacity(values.len());
    dev.extend(values.iter().map(|&v| (v - mu) * (v - mu)));
    pairwise_sum(&dev) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_integers() {
        let v: alloc::vec::Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(mean(&v), 500.5);
    }

    #[test]
    fn variance_of_two_points() {
        assert_eq!(population_variance(&[0.0, 2.0]), 1.0);
        assert_eq!(population_variance(&[3.0, 3.0, 3.0]), 0.0);
    }
}
