//! Sample summaries shared by diagnostics, prediction and scoring.

use crate::scalar::Scalar;

pub fn mean<T: Scalar>(x: &[T]) -> T {
    if x.is_empty() {
        return T::nan();
    }
    x.iter().copied().sum::<T>() / T::from_usize(x.len()).unwrap()
}

/// Sample variance with the `n - 1` denominator.
pub fn variance<T: Scalar>(x: &[T]) -> T {
    if x.len() < 2 {
        return T::nan();
    }
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_usize(x.len() - 1).unwrap()
}

pub fn sd<T: Scalar>(x: &[T]) -> T {
    variance(x).sqrt()
}

/// Linearly interpolated quantile of already sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    match sorted.len() {
        0 => T::nan(),
        1 => sorted[0],
        n => {
            let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let w = T::lit(h - lo as f64);
            sorted[lo] + w * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn sorted<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

pub fn quantile<T: Scalar>(x: &[T], p: f64) -> T {
    quantile_sorted(&sorted(x), p)
}

pub fn median<T: Scalar>(x: &[T]) -> T {
    quantile(x, 0.5)
}
