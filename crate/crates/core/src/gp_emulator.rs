//! Gaussian-process prior over per-run curve parameters.
//!
//! Every latent output `l` (A0, A1, [A2], Omega, Sigma) is a GP over the
//! standardized initial conditions with linear mean `h(z)ᵀ β_l`, marginal
//! variance `τ_l` and a shared anisotropic Gaussian correlation with nugget.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos_models::{CurveParams, ModelKind, Output};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

/// Number of initial conditions.
pub const N_IC: usize = 5;
/// Length of the regressor vector `(1, z1..z5)`.
pub const N_REG: usize = N_IC + 1;
/// Permeability is multiplied by this before standardization.
pub const PERMEABILITY_SCALE: f64 = 1e8;
/// The angle coordinate is divided by this multiple of its sd.
pub const ANGLE_SD_MULTIPLIER: f64 = 1.5;
/// Default nugget added to the correlation diagonal.
pub const DEFAULT_NUGGET: f64 = 1e-6;

pub type Standardized<T> = [T; N_IC];

/// Static inputs of one simulator run. Permeability is in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions<T> {
    pub height: T,
    pub angle: T,
    pub cohesion: T,
    pub friction_angle: T,
    pub permeability: T,
}

impl<T: Scalar> InitialConditions<T> {
    pub fn new(height: T, angle: T, cohesion: T, friction_angle: T, permeability: T) -> Self {
        Self {
            height,
            angle,
            cohesion,
            friction_angle,
            permeability,
        }
    }

    /// Coordinates in emulation units (permeability scaled by 1e8).
    pub fn scaled(&self) -> [T; N_IC] {
        [
            self.height,
            self.angle,
            self.cohesion,
            self.friction_angle,
            self.permeability * T::lit(PERMEABILITY_SCALE),
        ]
    }

    pub fn from_scaled(x: [T; N_IC]) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4] / T::lit(PERMEABILITY_SCALE))
    }

    pub fn is_finite(&self) -> bool {
        self.scaled().iter().all(|v| v.is_finite())
    }
}

/// Training mean and sd of each initial condition, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats<T> {
    pub mean: [T; N_IC],
    pub sd: [T; N_IC],
}

impl<T: Scalar> StandardizationStats<T> {
    pub fn new(mean: [T; N_IC], sd: [T; N_IC]) -> Result<Self> {
        if let Some(k) = sd.iter().position(|s| !(*s > T::zero()) || !s.is_finite()) {
            return Err(Error::invalid(format!(
                "standard deviation of initial condition {} must be positive",
                k + 1
            )));
        }
        Ok(Self { mean, sd })
    }

    /// Sample mean and (n - 1) sd of a training design.
    pub fn from_training(design: &[InitialConditions<T>]) -> Result<Self> {
        if design.len() < 2 {
            return Err(Error::invalid("standardization needs at least two training runs"));
        }
        let n = T::from_usize(design.len()).unwrap();
        let mut mean = [T::zero(); N_IC];
        for x in design {
            for (m, v) in mean.iter_mut().zip(x.scaled()) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut sd = [T::zero(); N_IC];
        for x in design {
            for k in 0..N_IC {
                let d = x.scaled()[k] - mean[k];
                sd[k] = sd[k] + d * d;
            }
        }
        sd.iter_mut().for_each(|s| *s = (*s / (n - T::one())).sqrt());
        Self::new(mean, sd)
    }

    pub fn standardize(&self, x: &InitialConditions<T>) -> Result<Standardized<T>> {
        standardize(x, self)
    }
}

/// Centres and scales one IC vector with the training statistics.
pub fn standardize<T: Scalar>(x: &InitialConditions<T>, s: &StandardizationStats<T>) -> Result<Standardized<T>> {
    let xs = x.scaled();
    let mut z = [T::zero(); N_IC];
    for k in 0..N_IC {
        if !(s.sd[k] > T::zero()) {
            return Err(Error::invalid(format!("zero sd for initial condition {}", k + 1)));
        }
        let div = if k == 1 { T::lit(ANGLE_SD_MULTIPLIER) * s.sd[k] } else { s.sd[k] };
        z[k] = (xs[k] - s.mean[k]) / div;
    }
    Ok(z)
}

/// Regressor `(1, z1, …, z5)`.
pub fn regressor<T: Scalar>(z: &Standardized<T>) -> [T; N_REG] {
    let mut h = [T::one(); N_REG];
    h[1..].copy_from_slice(z);
    h
}

pub fn regressor_matrix<T: Scalar>(zs: &[Standardized<T>]) -> Matrix<T> {
    Matrix::from_fn(zs.len(), N_REG, |i, j| regressor(&zs[i])[j])
}

fn check_lengths<T: Scalar>(delta: &[T; N_IC]) -> Result<()> {
    match delta.iter().position(|d| !(*d > T::zero()) || !d.is_finite()) {
        Some(k) => Err(Error::invalid(format!(
            "correlation length delta_{} must be positive, got {}",
            k + 1,
            delta[k]
        ))),
        None => Ok(()),
    }
}

/// Gaussian correlation without the nugget.
pub(crate) fn smooth_correlation<T: Scalar>(a: &Standardized<T>, b: &Standardized<T>, delta: &[T; N_IC]) -> T {
    let mut s = T::zero();
    for k in 0..N_IC {
        let d = (a[k] - b[k]) / delta[k];
        s = s + d * d;
    }
    (-s).exp()
}

/// `exp(-Σ (z_k - z'_k)² / δ_k²) + ζ·1[z = z']`.
pub fn correlation<T: Scalar>(a: &Standardized<T>, b: &Standardized<T>, delta: &[T; N_IC], nugget: T) -> Result<T> {
    check_lengths(delta)?;
    let nug = if a == b { nugget } else { T::zero() };
    Ok(smooth_correlation(a, b, delta) + nug)
}

/// Correlation matrix `U` of a design, nugget on the diagonal.
pub fn correlation_matrix<T: Scalar>(zs: &[Standardized<T>], delta: &[T; N_IC], nugget: T) -> Result<Matrix<T>> {
    check_lengths(delta)?;
    if nugget < T::zero() {
        return Err(Error::invalid("nugget must be non-negative"));
    }
    let n = zs.len();
    let mut u = Matrix::zeros(n, n);
    for i in 0..n {
        u[(i, i)] = T::one() + nugget;
        for j in 0..i {
            let c = smooth_correlation(&zs[i], &zs[j], delta);
            u[(i, j)] = c;
            u[(j, i)] = c;
        }
    }
    Ok(u)
}

/// Emulator hyperparameters. `beta` and `tau` are indexed in
/// `model.outputs()` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulatorHyper<T> {
    pub model: ModelKind,
    pub beta: Vec<[T; N_REG]>,
    pub tau: Vec<T>,
    pub delta: [T; N_IC],
    pub nugget: T,
}

impl<T: Scalar> EmulatorHyper<T> {
    pub fn validate(&self) -> Result<()> {
        let k = self.model.n_outputs();
        if self.beta.len() != k || self.tau.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "hyperparameters for {} outputs, the {} model has {k}",
                self.beta.len(),
                self.model
            )));
        }
        if self.tau.iter().any(|t| !(*t > T::zero()) || !t.is_finite()) {
            return Err(Error::invalid("marginal variances tau must be positive"));
        }
        if !(self.nugget >= T::zero()) {
            return Err(Error::invalid("nugget must be non-negative"));
        }
        check_lengths(&self.delta)
    }

    pub fn output_index(&self, out: Output) -> Option<usize> {
        self.model.outputs().iter().position(|&o| o == out)
    }

    /// Prior mean `h(z)ᵀ β_l` of output index `l`.
    pub fn mean_at(&self, l: usize, z: &Standardized<T>) -> T {
        regressor(z)
            .iter()
            .zip(&self.beta[l])
            .fold(T::zero(), |acc, (&h, &b)| acc + h * b)
    }
}

/// Normal prior `N(mean, sd)` with `sd` a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn log_density<T: Scalar>(&self, x: T) -> T {
        let z = (x - T::lit(self.mean)) / T::lit(self.sd);
        T::lit(-0.5 * (2.0 * std::f64::consts::PI).ln() - self.sd.ln()) - T::lit(0.5) * z * z
    }

    /// Central interval of `exp(X)` with the given two-sided coverage.
    pub fn lognormal_interval(&self, coverage: f64) -> (f64, f64) {
        let q = statrs::function::erf::erf_inv(coverage) * std::f64::consts::SQRT_2;
        ((self.mean - q * self.sd).exp(), (self.mean + q * self.sd).exp())
    }
}

/// Elicited hyperpriors for the emulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub intercept_a0: NormalPrior,
    pub intercept_a1: NormalPrior,
    pub intercept_a2: NormalPrior,
    pub intercept_omega: NormalPrior,
    pub intercept_sigma: NormalPrior,
    pub slope_sd_a0: f64,
    pub slope_sd_a1: f64,
    pub slope_sd_a2: f64,
    pub slope_sd_omega: f64,
    pub slope_sd_sigma: f64,
    /// Inverse-gamma shape for every `τ_l`.
    pub tau_shape: f64,
    /// Inverse-gamma scale, density ∝ x^-(shape+1) exp(-scale / x).
    pub tau_scale: f64,
    /// Exponential rate for every correlation length.
    pub delta_rate: f64,
}

impl Default for HyperPrior {
    fn default() -> Self {
        Self::elicited()
    }
}

impl HyperPrior {
    pub fn elicited() -> Self {
        Self {
            intercept_a0: NormalPrior::new(1.0f64.ln(), 0.5),
            intercept_a1: NormalPrior::new(0.6f64.ln(), 0.4),
            intercept_a2: NormalPrior::new(-0.5, 2.5),
            intercept_omega: NormalPrior::new(5.25, 1.0),
            intercept_sigma: NormalPrior::new(0.1f64.ln(), 0.5),
            slope_sd_a0: 0.5,
            slope_sd_a1: 0.5,
            slope_sd_a2: 1.0,
            slope_sd_omega: 1.0,
            slope_sd_sigma: 0.5,
            tau_shape: 3.0,
            tau_scale: 0.5,
            delta_rate: 0.2,
        }
    }

    pub fn intercept(&self, out: Output) -> NormalPrior {
        match out {
            Output::A0 => self.intercept_a0,
            Output::A1 => self.intercept_a1,
            Output::A2 => self.intercept_a2,
            Output::Omega => self.intercept_omega,
            Output::Sigma => self.intercept_sigma,
        }
    }

    pub fn slope(&self, out: Output) -> NormalPrior {
        let sd = match out {
            Output::A0 => self.slope_sd_a0,
            Output::A1 => self.slope_sd_a1,
            Output::A2 => self.slope_sd_a2,
            Output::Omega => self.slope_sd_omega,
            Output::Sigma => self.slope_sd_sigma,
        };
        NormalPrior::new(0.0, sd)
    }

    pub fn log_density_tau<T: Scalar>(&self, tau: T) -> T {
        if !(tau > T::zero()) {
            return T::neg_infinity();
        }
        let (a, b) = (self.tau_shape, self.tau_scale);
        T::lit(a * b.ln() - statrs::function::gamma::ln_gamma(a)) - T::lit(a + 1.0) * tau.ln() - T::lit(b) / tau
    }

    pub fn log_density_delta<T: Scalar>(&self, delta: T) -> T {
        if !(delta > T::zero()) {
            return T::neg_infinity();
        }
        T::lit(self.delta_rate.ln()) - T::lit(self.delta_rate) * delta
    }

    pub fn log_density_beta<T: Scalar>(&self, out: Output, beta: &[T; N_REG]) -> T {
        let mut lp = self.intercept(out).log_density(beta[0]);
        let slope = self.slope(out);
        for &b in &beta[1..] {
            lp = lp + slope.log_density(b);
        }
        lp
    }

    /// Joint log density of all hyperparameters; `-inf` outside the support.
    pub fn log_density<T: Scalar>(&self, h: &EmulatorHyper<T>) -> T {
        let outs = h.model.outputs();
        if h.beta.len() != outs.len() || h.tau.len() != outs.len() {
            return T::neg_infinity();
        }
        let mut lp = T::zero();
        for (l, &out) in outs.iter().enumerate() {
            lp = lp + self.log_density_beta(out, &h.beta[l]) + self.log_density_tau(h.tau[l]);
        }
        for &d in &h.delta {
            lp = lp + self.log_density_delta(d);
        }
        if lp.is_nan() {
            T::neg_infinity()
        } else {
            lp
        }
    }

    /// Prior means of every hyperparameter (intercepts at their means,
    /// slopes zero, `τ = b/(a-1)`, `δ = 1/rate`).
    pub fn mean_hyper(&self, model: ModelKind, nugget: f64) -> EmulatorHyper<f64> {
        let outs = model.outputs();
        EmulatorHyper {
            model,
            beta: outs
                .iter()
                .map(|&o| {
                    let mut b = [0.0; N_REG];
                    b[0] = self.intercept(o).mean;
                    b
                })
                .collect(),
            tau: vec![self.tau_scale / (self.tau_shape - 1.0); outs.len()],
            delta: [1.0 / self.delta_rate; N_IC],
            nugget,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, model: ModelKind, nugget: f64, rng: &mut R) -> EmulatorHyper<f64> {
        let outs = model.outputs();
        let gamma = Gamma::new(self.tau_shape, 1.0 / self.tau_scale).expect("valid gamma parameters");
        let exp = Exp::new(self.delta_rate).expect("valid exponential rate");
        let mut beta = Vec::with_capacity(outs.len());
        for &o in outs {
            let mut b = [0.0; N_REG];
            let ic = self.intercept(o);
            b[0] = ic.mean + ic.sd * rng.sample::<f64, _>(StandardNormal);
            let sd = self.slope(o).sd;
            for v in &mut b[1..] {
                *v = sd * rng.sample::<f64, _>(StandardNormal);
            }
            beta.push(b);
        }
        let tau = outs.iter().map(|_| 1.0 / gamma.sample(rng)).collect();
        let mut delta = [0.0; N_IC];
        for d in &mut delta {
            *d = exp.sample(rng);
        }
        EmulatorHyper {
            model,
            beta,
            tau,
            delta,
            nugget,
        }
    }
}

/// Log prior density of the hyperparameters under the elicited priors.
pub fn log_prior_hyper<T: Scalar>(h: &EmulatorHyper<T>) -> T {
    HyperPrior::elicited().log_density(h)
}

fn std_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Draws per-run latents `A_l ~ N(H β_l, τ_l U)` independently per output.
///
/// The draws are not truncated to the B-spline support; use
/// [`CurveParams::check`] on the result when that matters.
pub fn sample_latents_prior<T: Scalar, R: Rng + ?Sized>(
    h: &EmulatorHyper<T>,
    zs: &[Standardized<T>],
    rng: &mut R,
) -> Result<Vec<CurveParams<T>>> {
    h.validate()?;
    let u = correlation_matrix(zs, &h.delta, h.nugget)?;
    let chol = Cholesky::factor(&u).map_err(|e| {
        Error::numerical(
            "prior correlation matrix U",
            format!("{e}; increase the nugget or remove duplicated inputs"),
        )
    })?;
    let n = zs.len();
    let k = h.model.n_outputs();
    let mut latents = vec![vec![T::zero(); k]; n];
    for l in 0..k {
        let eps: Vec<T> = (0..n).map(|_| std_normal(rng)).collect();
        let corr = chol.mul_lower(&eps);
        let scale = h.tau[l].sqrt();
        for i in 0..n {
            latents[i][l] = h.mean_at(l, &zs[i]) + scale * corr[i];
        }
    }
    latents
        .iter()
        .map(|row| CurveParams::from_latents(h.model, row))
        .collect()
}

/// Where prior-predictive hyperparameters come from.
#[derive(Debug, Clone, Copy)]
pub enum HyperSource<'a> {
    /// Fresh draws from the hyperprior.
    Prior { prior: &'a HyperPrior, nugget: f64 },
    /// Cycle through supplied hyperparameter draws.
    Draws(&'a [EmulatorHyper<f64>]),
}

/// Prior-predictive curves on the shifted scale `Y = FoS - 1`.
#[derive(Debug, Clone)]
pub struct PriorPredictive {
    pub grid: Vec<f64>,
    pub params: Vec<CurveParams<f64>>,
    /// Deterministic curves `g(t)`.
    pub curves: Vec<Vec<f64>>,
    /// Noisy series `g(t) + ε`.
    pub noisy: Vec<Vec<f64>>,
    /// Samples abandoned after exhausting the A2 resampling budget.
    pub rejected: usize,
}

/// Resampling budget for the second-piece coefficient when a draw violates
/// `gamma2 <= gamma1`.
pub const A2_RESAMPLE_LIMIT: usize = 100;

/// Samples hyperparameters (or takes them from `source`), then latents at the
/// single standardized input `z`, then curves on `grid`.
///
/// `fixed` pins individual latent outputs (e.g. `A0 = 0`, `Omega = 5.25`).
#[allow(clippy::too_many_arguments)]
pub fn prior_predictive<R: Rng + ?Sized>(
    source: HyperSource<'_>,
    model: ModelKind,
    z: &Standardized<f64>,
    grid: &[f64],
    n_samples: usize,
    fixed: &[(Output, f64)],
    rng: &mut R,
) -> Result<PriorPredictive> {
    if let HyperSource::Draws(d) = source {
        if d.is_empty() {
            return Err(Error::invalid("no hyperparameter draws supplied"));
        }
        if let Some(bad) = d.iter().find(|h| h.model != model) {
            return Err(Error::invalid(format!("hyper draw for the {} model", bad.model)));
        }
    }
    let outs = model.outputs();
    let mut out = PriorPredictive {
        grid: grid.to_vec(),
        params: Vec::with_capacity(n_samples),
        curves: Vec::with_capacity(n_samples),
        noisy: Vec::with_capacity(n_samples),
        rejected: 0,
    };
    for s in 0..n_samples {
        let sampled;
        let hyper = match source {
            HyperSource::Prior { prior, nugget } => {
                sampled = prior.sample(model, nugget, rng);
                &sampled
            }
            HyperSource::Draws(d) => &d[s % d.len()],
        };
        let draw_output = |l: usize, rng: &mut R| {
            hyper.mean_at(l, z) + (hyper.tau[l] * (1.0 + hyper.nugget)).sqrt() * std_normal::<f64, R>(rng)
        };
        let mut latents: Vec<f64> = (0..outs.len()).map(|l| draw_output(l, rng)).collect();
        for &(o, v) in fixed {
            if let Some(l) = outs.iter().position(|&x| x == o) {
                latents[l] = v;
            }
        }
        if model == ModelKind::BSpline {
            let a2_fixed = fixed.iter().any(|(o, _)| *o == Output::A2);
            let mut tries = 0;
            while latents[2] > latents[1] && !a2_fixed && tries < A2_RESAMPLE_LIMIT {
                latents[2] = draw_output(2, rng);
                tries += 1;
            }
            if latents[2] > latents[1] {
                out.rejected += 1;
                continue;
            }
        }
        let params = CurveParams::from_latents(model, &latents)?;
        let sigma = params.sigma();
        let curve: Vec<f64> = grid.iter().map(|&t| params.value(t)).collect();
        let noisy = curve
            .iter()
            .map(|&g| g + sigma * std_normal::<f64, R>(rng))
            .collect();
        out.params.push(params);
        out.curves.push(curve);
        out.noisy.push(noisy);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standardize_examples() {
        let stats = StandardizationStats::<f64>::new([10.0, 20.0, 5.0, 20.0, 1.0], [4.0, 10.0, 1.0, 2.0, 0.5]).unwrap();
        let at_mean = InitialConditions::from_scaled(stats.mean);
        assert_eq!(standardize(&at_mean, &stats).unwrap(), [0.0; 5]);
        let x = InitialConditions::new(14.0, 35.0, 5.0, 20.0, 1e-8);
        let z = standardize(&x, &stats).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15);
        assert!((z[1] - 1.0).abs() < 1e-15);
        assert!(z[4].abs() < 1e-12);
    }

    #[test]
    fn standardize_rejects_zero_sd() {
        assert!(StandardizationStats::new([0.0; 5], [1.0, 1.0, 0.0, 1.0, 1.0]).is_err());
        let s = StandardizationStats {
            mean: [0.0; 5],
            sd: [1.0, 0.0, 1.0, 1.0, 1.0],
        };
        assert!(standardize(&InitialConditions::new(1.0, 1.0, 1.0, 1.0, 1.0), &s).is_err());
    }

    #[test]
    fn training_stats_centre_the_design() {
        let design: Vec<InitialConditions<f64>> = vec![
            InitialConditions::new(4.0, 10.0, 3.0, 19.0, 0.2e-8),
            InitialConditions::new(12.0, 30.0, 6.0, 22.0, 1.0e-8),
            InitialConditions::new(20.0, 60.0, 9.0, 24.0, 2.4e-8),
        ];
        let s = StandardizationStats::from_training(&design).unwrap();
        let mut sum = [0.0; 5];
        for x in &design {
            let z = s.standardize(x).unwrap();
            for k in 0..5 {
                sum[k] += z[k];
            }
        }
        assert!(sum.iter().all(|v| v.abs() < 1e-12));
        assert!((s.mean[4] - 3.6 / 3.0).abs() < 1e-12);
        let z0 = s.standardize(&InitialConditions::from_scaled(s.mean)).unwrap();
        assert!(z0.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn regressor_examples() {
        assert_eq!(regressor(&[0.0; 5]), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let h = HyperPrior::elicited().mean_hyper(ModelKind::BSpline, 0.0);
        let mut hh = h.clone();
        hh.beta[3] = [5.25, 1.0, -2.0, 0.3, 0.1, 9.0];
        assert_eq!(hh.mean_at(3, &[0.0; 5]), 5.25);
        assert_eq!(regressor(&[0.5, 1.0, 2.0, 3.0, 4.0]).len(), N_REG);
    }

    #[test]
    fn correlation_examples() {
        let d = [1.0; 5];
        let z = [0.3, -0.2, 1.0, 0.0, 0.5];
        assert_eq!(correlation(&z, &z, &d, 1e-6).unwrap(), 1.0 + 1e-6);
        let mut z2 = z;
        z2[2] += 1.0;
        assert!((correlation(&z, &z2, &d, 1e-6).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let bad = [1.0, 0.0, 1.0, 1.0, 1.0];
        assert!(correlation(&z, &z2, &bad, 0.0).is_err());
        assert!(correlation_matrix(&[z, z2], &bad, 0.0).is_err());
    }

    #[test]
    fn correlation_matrix_is_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let zs: Vec<[f64; 5]> = (0..15)
                .map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)))
                .collect();
            let delta: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.2..8.0));
            let u = correlation_matrix(&zs, &delta, 1e-6).unwrap();
            assert!(u.is_symmetric(0.0));
            assert!((0..15).all(|i| u[(i, i)] == 1.0 + 1e-6));
            Cholesky::factor(&u).unwrap();
        }
    }

    #[test]
    fn table_intervals_use_sd_parametrisation() {
        let p = HyperPrior::elicited();
        let (lo, hi) = p.intercept_omega.lognormal_interval(0.95);
        assert!((p.intercept_omega.mean.exp() - 191.0).abs() < 0.5);
        assert!((lo - 26.8).abs() / 26.8 < 0.01 && (hi - 1350.0).abs() / 1350.0 < 0.01);
        let (lo, hi) = p.intercept_sigma.lognormal_interval(0.95);
        assert!((lo - 0.0375).abs() / 0.0375 < 0.01 && (hi - 0.266).abs() / 0.266 < 0.01);
        let (lo, hi) = p.intercept_a0.lognormal_interval(0.95);
        assert!((lo + 1.0 - 1.38).abs() < 0.01 && (hi + 1.0 - 3.66).abs() < 0.01);
    }

    #[test]
    fn log_prior_support() {
        let p = HyperPrior::elicited();
        let mut h = p.mean_hyper(ModelKind::Quadratic, 1e-6);
        assert!(log_prior_hyper(&h).is_finite());
        h.tau[1] = 0.0;
        assert_eq!(log_prior_hyper(&h), f64::NEG_INFINITY);
        h.tau[1] = 0.2;
        h.delta[4] = -1.0;
        assert_eq!(log_prior_hyper(&h), f64::NEG_INFINITY);
        h.delta[4] = 1.0;
        h.beta.pop();
        assert_eq!(log_prior_hyper(&h), f64::NEG_INFINITY);
    }

    #[test]
    fn inverse_gamma_density_normalizes() {
        let p = HyperPrior::elicited();
        // trapezoid integration over (0, 200]
        let n = 400_000;
        let hstep = 200.0 / n as f64;
        let mut total = 0.0;
        let mut mean = 0.0;
        for i in 1..=n {
            let x = i as f64 * hstep;
            let d = p.log_density_tau(x).exp();
            total += d * hstep;
            mean += x * d * hstep;
        }
        assert!((total - 1.0).abs() < 1e-3, "total {total}");
        assert!((mean - 0.25).abs() < 5e-3, "mean {mean}");
    }

    #[test]
    fn latents_at_origin_follow_intercepts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut h = HyperPrior::elicited().mean_hyper(ModelKind::Quadratic, 0.0);
        h.tau = vec![1e-30; 4];
        let draws = sample_latents_prior(&h, &[[0.0; 5]], &mut rng).unwrap();
        let lat = draws[0].latents();
        for (l, v) in lat.iter().enumerate() {
            assert!((v - h.beta[l][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_hyper_has_no_a2() {
        let h = HyperPrior::elicited().mean_hyper(ModelKind::Quadratic, 0.0);
        assert_eq!(h.beta.len(), 4);
        assert!(h.output_index(Output::A2).is_none());
    }

    #[test]
    fn prior_predictive_with_fixed_intercepts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prior = HyperPrior::elicited();
        let grid: Vec<f64> = (0..=300).map(|t| t as f64).collect();
        let pp = prior_predictive(
            HyperSource::Prior { prior: &prior, nugget: 1e-6 },
            ModelKind::BSpline,
            &[0.0; 5],
            &grid,
            500,
            &[(Output::A0, 0.0), (Output::Omega, 5.25)],
            &mut rng,
        )
        .unwrap();
        assert!(!pp.curves.is_empty());
        for (p, c) in pp.params.iter().zip(&pp.curves) {
            assert!((c[0] + 1.0 - 2.0).abs() < 1e-12);
            assert!(p.check().is_ok());
            assert!(c[0] > 0.0);
        }
    }
}
