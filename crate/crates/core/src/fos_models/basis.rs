//! B-spline basis functions on an augmented (clamped) knot vector via the
//! De Boor–Cox recursion.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Augmented knot sequence: `0` repeated `order` times, the interior knots,
/// then `omega` repeated `order` times.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    knots: Vec<T>,
    order: usize,
    interior: usize,
}

impl<T: Scalar> KnotVector<T> {
    pub fn new(omega: T, interior: &[T], order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("spline order must be at least 1"));
        }
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::invalid(format!("boundary knot must be positive, got {omega}")));
        }
        let mut prev = T::zero();
        for &k in interior {
            if !(k >= prev) || k > omega {
                return Err(Error::invalid("interior knots must be nondecreasing within [0, omega]"));
            }
            prev = k;
        }
        let mut knots = vec![T::zero(); order];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(omega, order));
        Ok(Self {
            knots,
            order,
            interior: interior.len(),
        })
    }

    /// Order-3 (quadratic) knots on `[0, omega]`, with one interior knot at
    /// `omega / 2` when `with_midpoint` is set.
    pub fn quadratic(omega: T, with_midpoint: bool) -> Result<Self> {
        if with_midpoint {
            Self::new(omega, &[omega / T::lit(2.0)], 3)
        } else {
            Self::new(omega, &[], 3)
        }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interior_count(&self) -> usize {
        self.interior
    }

    /// Number of basis functions of the highest degree (`m + o`).
    pub fn basis_count(&self) -> usize {
        self.interior + self.order
    }

    fn alpha(&self, l: usize, j: usize, x: T) -> T {
        let (kl, klj) = (self.knots[l], self.knots[l + j]);
        if klj != kl {
            (x - kl) / (klj - kl)
        } else {
            T::zero()
        }
    }

    /// Value of basis function `phi_{l,j}` (degree `j`) at `x`.
    pub fn basis(&self, l: usize, j: usize, x: T) -> Result<T> {
        if j >= self.order {
            return Err(Error::IndexOutOfRange(format!(
                "degree {j} exceeds order {} - 1",
                self.order
            )));
        }
        // phi_{l,j} needs knots l..=l+j+1
        if l + j + 1 >= self.knots.len() {
            return Err(Error::IndexOutOfRange(format!(
                "basis index {l} invalid for degree {j} with {} knots",
                self.knots.len()
            )));
        }
        Ok(self.basis_unchecked(l, j, x))
    }

    fn basis_unchecked(&self, l: usize, j: usize, x: T) -> T {
        if j == 0 {
            return if self.knots[l] <= x && x < self.knots[l + 1] {
                T::one()
            } else {
                T::zero()
            };
        }
        let left = self.alpha(l, j, x) * self.basis_unchecked(l, j - 1, x);
        let right = (T::one() - self.alpha(l + 1, j, x)) * self.basis_unchecked(l + 1, j - 1, x);
        left + right
    }

    /// Spline value `Σ_l coef[l] phi_{l, order-1}(x)`.
    pub fn evaluate(&self, coef: &[T], x: T) -> Result<T> {
        if coef.len() != self.basis_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} basis functions",
                coef.len(),
                self.basis_count()
            )));
        }
        let deg = self.order - 1;
        Ok(coef
            .iter()
            .enumerate()
            .map(|(l, &c)| c * self.basis_unchecked(l, deg, x))
            .sum())
    }
}

/// De Boor recursion value `phi_{l,j}(t)` on the knot vector.
pub fn bspline_basis<T: Scalar>(kv: &KnotVector<T>, l: usize, j: usize, t: T) -> Result<T> {
    kv.basis(l, j, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knot_layout() {
        let kv = KnotVector::quadratic(10.0, true).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 5.0, 10.0, 10.0, 10.0]);
        assert_eq!(kv.knots().len(), kv.interior_count() + 2 * kv.order());
        let q = KnotVector::quadratic(10.0, false).unwrap();
        assert_eq!(q.knots().len(), 6);
        assert_eq!(q.basis_count(), 3);
    }

    #[test]
    fn degree_zero_is_indicator() {
        let kv = KnotVector::quadratic(10.0, true).unwrap();
        // l = 2 spans [0, 5), l = 3 spans [5, 10)
        assert_eq!(kv.basis(2, 0, 0.0).unwrap(), 1.0);
        assert_eq!(kv.basis(2, 0, 4.999).unwrap(), 1.0);
        assert_eq!(kv.basis(2, 0, 5.0).unwrap(), 0.0);
        assert_eq!(kv.basis(3, 0, 5.0).unwrap(), 1.0);
        assert_eq!(kv.basis(3, 0, 10.0).unwrap(), 0.0);
        assert_eq!(kv.basis(0, 0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_indices() {
        let kv = KnotVector::quadratic(10.0, true).unwrap();
        assert!(kv.basis(0, 3, 1.0).is_err());
        assert!(kv.basis(4, 2, 1.0).is_err());
        assert!(kv.basis(3, 2, 1.0).is_ok());
        assert!(kv.basis(5, 0, 1.0).is_ok());
        assert!(kv.basis(6, 0, 1.0).is_err());
    }

    #[test]
    fn partition_of_unity() {
        for &mid in &[false, true] {
            let kv = KnotVector::quadratic(7.5, mid).unwrap();
            for i in 0..300 {
                let t = 7.5 * i as f64 / 300.0;
                let s: f64 = (0..kv.basis_count()).map(|l| kv.basis(l, 2, t).unwrap()).sum();
                assert!((s - 1.0).abs() < 1e-14, "t={t} sum={s}");
            }
            let s_end: f64 = (0..kv.basis_count()).map(|l| kv.basis(l, 2, 7.5).unwrap()).sum();
            assert_eq!(s_end, 0.0);
        }
    }

    #[test]
    fn clamped_ends_hit_first_and_last_coefficients() {
        let kv = KnotVector::quadratic(8.0f64, true).unwrap();
        let coef = [0.7, 1.3, 0.4, 2.1];
        assert!((kv.evaluate(&coef, 0.0).unwrap() - 0.7).abs() < 1e-15);
        let near_end = kv.evaluate(&coef, 8.0 - 1e-9).unwrap();
        assert!((near_end - 2.1).abs() < 1e-8, "{near_end}");
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(KnotVector::new(0.0, &[], 3).is_err());
        assert!(KnotVector::new(5.0, &[6.0], 3).is_err());
        assert!(KnotVector::new(5.0, &[3.0, 2.0], 3).is_err());
        assert!(KnotVector::<f64>::new(5.0, &[], 0).is_err());
    }
}
