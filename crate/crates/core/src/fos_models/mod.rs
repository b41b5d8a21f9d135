//! Deterioration curve models: a single constrained quadratic and a
//! two-piece quadratic B-spline, both parametrized on the log scale.

mod basis;
mod curve;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use basis::{bspline_basis, KnotVector};
pub use curve::{eval_bspline, eval_quadratic, BSplineParams, QuadraticParams};
pub(crate) use curve::value_and_log_partials;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance used to detect a B-spline that is exactly a quadratic.
pub const COLLAPSE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Quadratic,
    #[serde(rename = "bspline")]
    BSpline,
}

impl ModelKind {
    pub fn outputs(self) -> &'static [Output] {
        match self {
            ModelKind::Quadratic => &[Output::A0, Output::A1, Output::Omega, Output::Sigma],
            ModelKind::BSpline => &[Output::A0, Output::A1, Output::A2, Output::Omega, Output::Sigma],
        }
    }

    pub fn n_outputs(self) -> usize {
        self.outputs().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Quadratic => "quadratic",
            ModelKind::BSpline => "bspline",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" | "q" => Ok(ModelKind::Quadratic),
            "bspline" | "b-spline" | "bs" => Ok(ModelKind::BSpline),
            other => Err(Error::invalid(format!("unknown model '{other}' (expected quadratic or bspline)"))),
        }
    }
}

/// One emulated curve parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Output {
    A0,
    A1,
    A2,
    Omega,
    Sigma,
}

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::A0 => "A0",
            Output::A1 => "A1",
            Output::A2 => "A2",
            Output::Omega => "Omega",
            Output::Sigma => "Sigma",
        }
    }
}

/// Per-run curve parameters for either model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum CurveParams<T> {
    Quadratic(QuadraticParams<T>),
    #[serde(rename = "bspline")]
    BSpline(BSplineParams<T>),
}

impl<T: Scalar> CurveParams<T> {
    /// Assembles parameters from latent values ordered as `model.outputs()`.
    pub fn from_latents(model: ModelKind, latents: &[T]) -> Result<Self> {
        if latents.len() != model.n_outputs() {
            return Err(Error::DimensionMismatch(format!(
                "{} latents for the {model} model (expected {})",
                latents.len(),
                model.n_outputs()
            )));
        }
        Ok(match model {
            ModelKind::Quadratic => CurveParams::Quadratic(QuadraticParams::new(
                latents[0], latents[1], latents[2], latents[3],
            )),
            ModelKind::BSpline => CurveParams::BSpline(BSplineParams::new(
                latents[0], latents[1], latents[2], latents[3], latents[4],
            )),
        })
    }

    pub fn model(&self) -> ModelKind {
        match self {
            CurveParams::Quadratic(_) => ModelKind::Quadratic,
            CurveParams::BSpline(_) => ModelKind::BSpline,
        }
    }

    /// Latent values in `model.outputs()` order.
    pub fn latents(&self) -> Vec<T> {
        match *self {
            CurveParams::Quadratic(p) => vec![p.a0, p.a1, p.omega_log, p.sigma_log],
            CurveParams::BSpline(p) => vec![p.a0, p.a1, p.a2, p.omega_log, p.sigma_log],
        }
    }

    pub fn value(&self, t: T) -> T {
        match self {
            CurveParams::Quadratic(p) => p.value(t),
            CurveParams::BSpline(p) => p.value(t),
        }
    }

    pub fn eval(&self, t: T) -> Result<T> {
        match self {
            CurveParams::Quadratic(p) => eval_quadratic(p, t),
            CurveParams::BSpline(p) => eval_bspline(p, t),
        }
    }

    pub fn gamma0(&self) -> T {
        match self {
            CurveParams::Quadratic(p) => p.gamma0(),
            CurveParams::BSpline(p) => p.gamma0(),
        }
    }

    pub fn omega(&self) -> T {
        match self {
            CurveParams::Quadratic(p) => p.omega(),
            CurveParams::BSpline(p) => p.omega(),
        }
    }

    pub fn sigma(&self) -> T {
        match self {
            CurveParams::Quadratic(p) => p.sigma(),
            CurveParams::BSpline(p) => p.sigma(),
        }
    }

    pub fn check(&self) -> ConstraintReport {
        match self {
            CurveParams::Quadratic(p) => check_constraints(p),
            CurveParams::BSpline(p) => check_constraints(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite(&'static str),
    NonPositive(&'static str),
    /// The second piece rises after the interior knot (`gamma2 > gamma1`).
    IncreasingAfterKnot { gamma1: f64, gamma2: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite(n) => write!(f, "{n} is not finite"),
            Violation::NonPositive(n) => write!(f, "{n} is not strictly positive"),
            Violation::IncreasingAfterKnot { gamma1, gamma2 } => write!(
                f,
                "curve increases after the interior knot (gamma2 = {gamma2} > gamma1 = {gamma1})"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Parameter sets that can be checked against the curve constraints.
pub trait Constrained {
    fn constraint_report(&self) -> ConstraintReport;
}

fn positivity<T: Scalar>(report: &mut ConstraintReport, name: &'static str, log_value: T) {
    if !log_value.is_finite() {
        report.violations.push(Violation::NonFinite(name));
    } else if !(log_value.exp() > T::zero()) || !log_value.exp().is_finite() {
        report.violations.push(Violation::NonPositive(name));
    }
}

impl<T: Scalar> Constrained for QuadraticParams<T> {
    fn constraint_report(&self) -> ConstraintReport {
        let mut r = ConstraintReport::default();
        positivity(&mut r, "gamma0", self.a0);
        positivity(&mut r, "gamma1", self.a1);
        positivity(&mut r, "omega", self.omega_log);
        positivity(&mut r, "sigma", self.sigma_log);
        r
    }
}

impl<T: Scalar> Constrained for BSplineParams<T> {
    fn constraint_report(&self) -> ConstraintReport {
        let mut r = ConstraintReport::default();
        positivity(&mut r, "gamma0", self.a0);
        positivity(&mut r, "gamma1", self.a1);
        positivity(&mut r, "gamma2", self.a2);
        positivity(&mut r, "omega", self.omega_log);
        positivity(&mut r, "sigma", self.sigma_log);
        // The second piece has slope 2(γ2-γ1)/ω at the knot and -4γ2/ω at ω;
        // it is linear in t, so it is non-positive throughout iff γ2 <= γ1.
        if r.is_ok() && self.a2 > self.a1 {
            r.violations.push(Violation::IncreasingAfterKnot {
                gamma1: self.gamma1().as_f64(),
                gamma2: self.gamma2().as_f64(),
            });
        }
        r
    }
}

pub fn check_constraints<P: Constrained>(p: &P) -> ConstraintReport {
    p.constraint_report()
}

/// Returns the equivalent quadratic when the B-spline satisfies
/// `gamma2 = gamma1 - gamma0 / 2` (relative tolerance [`COLLAPSE_REL_TOL`]).
pub fn collapse_to_quadratic<T: Scalar>(p: &BSplineParams<T>) -> Option<QuadraticParams<T>> {
    let (g0, g1, g2) = (p.gamma0(), p.gamma1(), p.gamma2());
    let target = g1 - g0 / T::lit(2.0);
    let scale = g0.max(g1).max(g2);
    if (g2 - target).abs() > T::lit(COLLAPSE_REL_TOL) * scale {
        return None;
    }
    let g1q = T::lit(2.0) * g1 - g0;
    if !(g1q > T::zero()) {
        return None;
    }
    Some(QuadraticParams::new(p.a0, g1q.ln(), p.omega_log, p.sigma_log))
}
