//! Fixed-tree pairwise summation.
//!
//! Every norm reduction goes through [`pairwise_sum`] so the summation order
//! depends only on the input length, never on thread count.

use crate::Real;

const BLOCK: usize = 16;

pub(crate) fn pairwise_sum<T: Real>(values: &[T]) -> T {
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f` applied to each element.
pub(crate) fn pairwise_map_sum<S, T: Real>(values: &[S], f: impl Fn(&S) -> T) -> T {
    let mapped: Vec<T> = values.iter().map(f).collect();
    pairwise_sum(&mapped)
}

pub(crate) fn max_of<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc.max(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }

    #[test]
    fn more_accurate_than_left_fold() {
        let v = vec![0.1f32; 1 << 20];
        let exact = 0.1f64 * (1 << 20) as f64;
        let pw = pairwise_sum(&v) as f64;
        let naive = v.iter().fold(0.0f32, |a, &b| a + b) as f64;
        assert!((pw - exact).abs() < (naive - exact).abs());
    }
}
