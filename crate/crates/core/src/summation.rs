//! Deterministic floating-point reductions.
//!
//! All statistics in this crate accumulate through fixed-order pairwise
//! (tree) summation.  Besides the usual accuracy gain over naive left
//! folds, the fixed reduction order makes reports bit-identical across
//! runs with the same inputs.

use num::complex::Complex64;

/// Pairwise (tree) sum of a slice of `f64` in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Pairwise (tree) sum of a slice of complex values in a fixed order.
pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_small_input() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(pairwise_sum(&v), 15.0);
    }

    #[test]
    fn more_accurate_than_naive_fold() {
        // Sum of 10^7 copies of 0.1 in tree order stays close to 10^6.
        let v = vec![0.1f64; 1 << 20];
        let exact = (1u64 << 20) as f64 * 0.1;
        assert!((pairwise_sum(&v) - exact).abs() < 1e-7);
    }
}
