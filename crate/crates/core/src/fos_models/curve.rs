use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn finite_or_err<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} is not finite ({v})")))
    }
}

fn check_time<T: Scalar>(t: T) -> Result<()> {
    if t.is_finite() && t >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and non-negative, got {t}")))
    }
}

/// Single-quadratic deterioration curve, stored on the log scale.
///
/// `gamma0 = exp(a0)` is the initial excess factor of safety, `gamma1 = exp(a1)`
/// the middle control coefficient, `omega = exp(omega_log)` the model
/// time-to-failure in years and `sigma = exp(sigma_log)` the noise sd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticParams<T> {
    pub a0: T,
    pub a1: T,
    pub omega_log: T,
    pub sigma_log: T,
}

impl<T: Scalar> QuadraticParams<T> {
    pub fn new(a0: T, a1: T, omega_log: T, sigma_log: T) -> Self {
        Self {
            a0,
            a1,
            omega_log,
            sigma_log,
        }
    }

    /// Builds the parameters from positive constrained values.
    pub fn from_constrained(gamma0: T, gamma1: T, omega: T, sigma: T) -> Result<Self> {
        for (name, v) in [("gamma0", gamma0), ("gamma1", gamma1), ("omega", omega), ("sigma", sigma)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self::new(gamma0.ln(), gamma1.ln(), omega.ln(), sigma.ln()))
    }

    pub fn gamma0(&self) -> T {
        self.a0.exp()
    }
    pub fn gamma1(&self) -> T {
        self.a1.exp()
    }
    pub fn omega(&self) -> T {
        self.omega_log.exp()
    }
    pub fn sigma(&self) -> T {
        self.sigma_log.exp()
    }

    pub fn validate(&self) -> Result<()> {
        finite_or_err("A0", self.a0)?;
        finite_or_err("A1", self.a1)?;
        finite_or_err("Omega", self.omega_log)?;
        finite_or_err("Sigma", self.sigma_log)
    }

    /// Power-basis coefficients `(c0, c1, c2)` of the polynomial part.
    pub fn coefficients(&self) -> [T; 3] {
        let (g0, g1, w) = (self.gamma0(), self.gamma1(), self.omega());
        let two = T::lit(2.0);
        [g0, (two * g1 - two * g0) / w, (g0 - two * g1) / (w * w)]
    }

    /// The polynomial without the `[0, omega)` indicator.
    pub fn polynomial(&self, t: T) -> T {
        let [c0, c1, c2] = self.coefficients();
        c0 + t * (c1 + t * c2)
    }

    /// Deterministic curve value, zero from `omega` onwards.
    pub fn value(&self, t: T) -> T {
        if t >= T::zero() && t < self.omega() {
            self.polynomial(t)
        } else {
            T::zero()
        }
    }

    /// Coefficients of the original `alpha0 + alpha1 t + alpha2 t²` form.
    pub fn alphas(&self) -> [T; 3] {
        self.coefficients()
    }
}

/// Two-piece quadratic B-spline with an interior knot at `omega / 2` and the
/// last control coefficient pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSplineParams<T> {
    pub a0: T,
    pub a1: T,
    pub a2: T,
    pub omega_log: T,
    pub sigma_log: T,
}

impl<T: Scalar> BSplineParams<T> {
    pub fn new(a0: T, a1: T, a2: T, omega_log: T, sigma_log: T) -> Self {
        Self {
            a0,
            a1,
            a2,
            omega_log,
            sigma_log,
        }
    }

    pub fn from_constrained(gamma0: T, gamma1: T, gamma2: T, omega: T, sigma: T) -> Result<Self> {
        for (name, v) in [
            ("gamma0", gamma0),
            ("gamma1", gamma1),
            ("gamma2", gamma2),
            ("omega", omega),
            ("sigma", sigma),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self::new(gamma0.ln(), gamma1.ln(), gamma2.ln(), omega.ln(), sigma.ln()))
    }

    pub fn gamma0(&self) -> T {
        self.a0.exp()
    }
    pub fn gamma1(&self) -> T {
        self.a1.exp()
    }
    pub fn gamma2(&self) -> T {
        self.a2.exp()
    }
    pub fn omega(&self) -> T {
        self.omega_log.exp()
    }
    pub fn sigma(&self) -> T {
        self.sigma_log.exp()
    }
    pub fn knot(&self) -> T {
        self.omega() / T::lit(2.0)
    }

    pub fn validate(&self) -> Result<()> {
        finite_or_err("A0", self.a0)?;
        finite_or_err("A1", self.a1)?;
        finite_or_err("A2", self.a2)?;
        finite_or_err("Omega", self.omega_log)?;
        finite_or_err("Sigma", self.sigma_log)
    }

    /// Power-basis coefficients of the two pieces, `[first, second]`.
    pub fn piece_coefficients(&self) -> [[T; 3]; 2] {
        let (g0, g1, g2, w) = (self.gamma0(), self.gamma1(), self.gamma2(), self.omega());
        let c = T::lit;
        let w2 = w * w;
        [
            [
                g0,
                (c(4.0) * g1 - c(4.0) * g0) / w,
                (c(4.0) * g0 - c(6.0) * g1 + c(2.0) * g2) / w2,
            ],
            [
                c(2.0) * (g1 - g2),
                (c(8.0) * g2 - c(4.0) * g1) / w,
                (c(2.0) * g1 - c(6.0) * g2) / w2,
            ],
        ]
    }

    pub fn first_piece(&self, t: T) -> T {
        let [c0, c1, c2] = self.piece_coefficients()[0];
        c0 + t * (c1 + t * c2)
    }

    pub fn second_piece(&self, t: T) -> T {
        let [c0, c1, c2] = self.piece_coefficients()[1];
        c0 + t * (c1 + t * c2)
    }

    /// Deterministic curve value: first piece on `[0, ω/2)`, second on
    /// `[ω/2, ω)`, zero afterwards.
    pub fn value(&self, t: T) -> T {
        let w = self.omega();
        if t < T::zero() || t >= w {
            T::zero()
        } else if t < w / T::lit(2.0) {
            self.first_piece(t)
        } else {
            self.second_piece(t)
        }
    }

    /// Derivative of the second piece with respect to time.
    pub fn second_piece_slope(&self, t: T) -> T {
        let [_, c1, c2] = self.piece_coefficients()[1];
        c1 + T::lit(2.0) * c2 * t
    }
}

pub fn eval_quadratic<T: Scalar>(p: &QuadraticParams<T>, t: T) -> Result<T> {
    p.validate()?;
    check_time(t)?;
    Ok(p.value(t))
}

pub fn eval_bspline<T: Scalar>(p: &BSplineParams<T>, t: T) -> Result<T> {
    p.validate()?;
    check_time(t)?;
    Ok(p.value(t))
}

/// Curve value together with its partial derivatives with respect to the
/// log-scale parameters `(A0, A1, A2, Omega)`.
///
/// Written in terms of `u = t / ω`, where the curve is `Σ γ_c b_c(u)` and
/// `∂g/∂Ω = -u g'(u)`. The `A2` slot is zero for the quadratic model.
pub(crate) fn value_and_log_partials<T: Scalar>(gammas: &[T; 3], omega: T, bspline: bool, t: T) -> (T, [T; 4]) {
    let zero = T::zero();
    if t < zero || t >= omega {
        return (zero, [zero; 4]);
    }
    let c = T::lit;
    let u = t / omega;
    let (b, db): ([T; 3], [T; 3]) = if !bspline {
        let v = T::one() - u;
        ([v * v, c(2.0) * u * v, zero], [c(-2.0) * v, c(2.0) - c(4.0) * u, zero])
    } else if u < c(0.5) {
        let v = T::one() - c(2.0) * u;
        (
            [v * v, c(4.0) * u - c(6.0) * u * u, c(2.0) * u * u],
            [c(-4.0) * v, c(4.0) - c(12.0) * u, c(4.0) * u],
        )
    } else {
        let v = T::one() - u;
        (
            [zero, c(2.0) * v * v, c(-2.0) * v * (T::one() - c(3.0) * u)],
            [zero, c(-4.0) * v, c(8.0) - c(12.0) * u],
        )
    };
    let mut g = zero;
    let mut dg_du = zero;
    let mut partials = [zero; 4];
    for k in 0..3 {
        let term = gammas[k] * b[k];
        g = g + term;
        dg_du = dg_du + gammas[k] * db[k];
        partials[k] = term;
    }
    partials[3] = -u * dg_du;
    (g, partials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_examples() {
        let p = QuadraticParams::<f64>::from_constrained(1.0, 1.0, 100.0, 0.1).unwrap();
        assert_eq!(eval_quadratic(&p, 0.0).unwrap(), 1.0);
        assert!((eval_quadratic(&p, 50.0).unwrap() - 0.75).abs() < 1e-14);
        assert_eq!(eval_quadratic(&p, p.omega()).unwrap(), 0.0);
        assert_eq!(eval_quadratic(&p, 150.0).unwrap(), 0.0);

        let q = QuadraticParams::<f64>::from_constrained(2.0, 0.5, 80.0, 0.1).unwrap();
        assert!(q.polynomial(80.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_alphas_match_reparametrisation() {
        // gamma1 = (alpha1 * omega + 2 alpha0) / 2
        let p = QuadraticParams::<f64>::from_constrained(1.3, 0.7, 60.0, 0.1).unwrap();
        let [a0, a1, a2] = p.alphas();
        let w = p.omega();
        assert!((a0 - 1.3).abs() < 1e-14);
        assert!(((a1 * w + 2.0 * a0) / 2.0 - 0.7).abs() < 1e-12);
        assert!((a2 + (a1 + a0 / w) / w).abs() < 1e-15);
    }

    #[test]
    fn non_finite_parameters_rejected() {
        let p = QuadraticParams::new(f64::NAN, 0.0, 4.0, -2.0);
        assert!(eval_quadratic(&p, 1.0).is_err());
        let b = BSplineParams::new(0.0, 0.0, f64::INFINITY, 4.0, -2.0);
        assert!(eval_bspline(&b, 1.0).is_err());
        let ok = QuadraticParams::new(0.0, 0.0, 4.0, -2.0);
        assert!(eval_quadratic(&ok, -1.0).is_err());
    }

    #[test]
    fn bspline_examples() {
        let p = BSplineParams::<f64>::from_constrained(1.2, 0.9, 0.4, 70.0, 0.05).unwrap();
        assert_eq!(eval_bspline(&p, 0.0).unwrap(), 1.2);
        let mid = (0.9 + 0.4) / 2.0;
        assert!((p.first_piece(35.0) - mid).abs() < 1e-12);
        assert!((p.second_piece(35.0) - mid).abs() < 1e-12);
        assert!((eval_bspline(&p, 35.0).unwrap() - mid).abs() < 1e-12);
        assert!(p.second_piece(70.0).abs() < 1e-12);
        assert_eq!(eval_bspline(&p, p.omega()).unwrap(), 0.0);
    }

    #[test]
    fn log_partials_match_value_and_finite_differences() {
        let h = 1e-6;
        for &bs in &[false, true] {
            let theta = [0.1_f64, -0.4, -0.9, 4.3];
            let f = |th: &[f64; 4], t: f64| {
                let gam = [th[0].exp(), th[1].exp(), if bs { th[2].exp() } else { 0.0 }];
                value_and_log_partials(&gam, th[3].exp(), bs, t)
            };
            for &t in &[0.0, 3.0, 20.0, 36.0, 37.0, 55.0, 72.0] {
                let (g, d) = f(&theta, t);
                let direct = if bs {
                    BSplineParams::new(theta[0], theta[1], theta[2], theta[3], 0.0).value(t)
                } else {
                    QuadraticParams::new(theta[0], theta[1], theta[3], 0.0).value(t)
                };
                assert!((g - direct).abs() < 1e-12, "t={t} g={g} direct={direct}");
                for k in 0..4 {
                    if !bs && k == 2 {
                        assert_eq!(d[k], 0.0);
                        continue;
                    }
                    let mut up = theta;
                    let mut dn = theta;
                    up[k] += h;
                    dn[k] -= h;
                    let fd = (f(&up, t).0 - f(&dn, t).0) / (2.0 * h);
                    assert!((fd - d[k]).abs() < 1e-6, "bs={bs} t={t} k={k} fd={fd} an={}", d[k]);
                }
            }
        }
    }

    #[test]
    fn single_precision_evaluation() {
        let p = QuadraticParams::<f32>::from_constrained(1.0, 1.0, 100.0, 0.1).unwrap();
        assert!((p.value(50.0) - 0.75).abs() < 1e-5);
    }
}
