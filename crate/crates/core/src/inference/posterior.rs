//! Joint log posterior of the hierarchical model on an unconstrained vector.
//!
//! Layout of the vector for `K` outputs and `N` runs:
//! latents `A_l[i]` at `l*N + i`, then `β` (`K × 6`), then `log τ` (`K`),
//! then `log δ` (5). For the B-spline the `A2` slot holds `ln(A1 - A2)`, so
//! every finite vector satisfies `A2 ≤ A1`. Jacobian terms for all
//! transforms are included.

use crate::data::FoSSeries;
use crate::error::{Error, Result};
use crate::fos_models::{value_and_log_partials, CurveParams, ModelKind};
use crate::gp_emulator::{
    regressor_matrix, smooth_correlation, EmulatorHyper, HyperPrior, Standardized, N_IC, N_REG,
};
use crate::linalg::{Cholesky, Matrix};

use super::{FitData, ModelState};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Index arithmetic for the unconstrained parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub model: ModelKind,
    pub n_runs: usize,
}

impl ParamLayout {
    pub fn new(model: ModelKind, n_runs: usize) -> Self {
        Self { model, n_runs }
    }

    pub fn n_outputs(&self) -> usize {
        self.model.n_outputs()
    }

    pub fn dim(&self) -> usize {
        let k = self.n_outputs();
        k * self.n_runs + k * N_REG + k + N_IC
    }

    pub fn latent(&self, l: usize, i: usize) -> usize {
        l * self.n_runs + i
    }

    pub fn beta(&self, l: usize, j: usize) -> usize {
        self.n_outputs() * self.n_runs + l * N_REG + j
    }

    pub fn log_tau(&self, l: usize) -> usize {
        let k = self.n_outputs();
        k * self.n_runs + k * N_REG + l
    }

    pub fn log_delta(&self, d: usize) -> usize {
        let k = self.n_outputs();
        k * self.n_runs + k * N_REG + k + d
    }

    /// Names of the natural-scale parameters, in vector order.
    pub fn names(&self, run_ids: &[u32]) -> Vec<String> {
        let outs = self.model.outputs();
        let mut names = Vec::with_capacity(self.dim());
        for o in outs {
            for id in run_ids {
                names.push(format!("{}[{id}]", o.name()));
            }
        }
        for o in outs {
            for j in 0..N_REG {
                names.push(format!("beta_{}[{j}]", o.name()));
            }
        }
        for o in outs {
            names.push(format!("tau_{}", o.name()));
        }
        for d in 1..=N_IC {
            names.push(format!("delta[{d}]"));
        }
        names
    }

    /// Whether position `p` holds a hyperparameter rather than a latent.
    pub fn is_hyper(&self, p: usize) -> bool {
        p >= self.n_outputs() * self.n_runs
    }

    fn gap_slots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = if self.model == ModelKind::BSpline { self.n_runs } else { 0 };
        (0..n).map(|i| (self.latent(1, i), self.latent(2, i)))
    }

    /// Maps an unconstrained vector to natural scale: exp of log τ and
    /// log δ, and `A2 = A1 - exp(u)`.
    pub fn to_natural(&self, x: &[f64]) -> Vec<f64> {
        let first_log = self.log_tau(0);
        let mut v: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(p, &v)| if p >= first_log { v.exp() } else { v })
            .collect();
        for (a1, a2) in self.gap_slots() {
            v[a2] = x[a1] - x[a2].exp();
        }
        v
    }

    pub fn to_unconstrained(&self, natural: &[f64]) -> Vec<f64> {
        let first_log = self.log_tau(0);
        let mut x: Vec<f64> = natural
            .iter()
            .enumerate()
            .map(|(p, &v)| if p >= first_log { v.ln() } else { v })
            .collect();
        for (a1, a2) in self.gap_slots() {
            x[a2] = (natural[a1] - natural[a2]).ln();
        }
        x
    }

    pub fn state(&self, x: &[f64], nugget: f64) -> ModelState {
        self.state_natural(&self.to_natural(x), nugget)
    }

    pub fn state_natural(&self, v: &[f64], nugget: f64) -> ModelState {
        let k = self.n_outputs();
        let curves = (0..self.n_runs)
            .map(|i| {
                let lat: Vec<f64> = (0..k).map(|l| v[self.latent(l, i)]).collect();
                CurveParams::from_latents(self.model, &lat).expect("latent count matches model")
            })
            .collect();
        let beta = (0..k)
            .map(|l| std::array::from_fn(|j| v[self.beta(l, j)]))
            .collect();
        let tau = (0..k).map(|l| v[self.log_tau(l)]).collect();
        let delta = std::array::from_fn(|d| v[self.log_delta(d)]);
        ModelState {
            model: self.model,
            curves,
            hyper: EmulatorHyper {
                model: self.model,
                beta,
                tau,
                delta,
                nugget,
            },
        }
    }

    pub fn pack_natural(&self, state: &ModelState) -> Result<Vec<f64>> {
        state.check_dims(self.n_runs)?;
        let k = self.n_outputs();
        let mut v = vec![0.0; self.dim()];
        for (i, c) in state.curves.iter().enumerate() {
            for (l, a) in c.latents().into_iter().enumerate() {
                v[self.latent(l, i)] = a;
            }
        }
        for l in 0..k {
            for j in 0..N_REG {
                v[self.beta(l, j)] = state.hyper.beta[l][j];
            }
            v[self.log_tau(l)] = state.hyper.tau[l];
        }
        for d in 0..N_IC {
            v[self.log_delta(d)] = state.hyper.delta[d];
        }
        Ok(v)
    }

    pub fn pack(&self, state: &ModelState) -> Result<Vec<f64>> {
        Ok(self.to_unconstrained(&self.pack_natural(state)?))
    }
}

/// Something the samplers can explore.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
    /// Log density with its gradient written into `grad`.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// The hierarchical posterior for fixed data, prior and nugget.
#[derive(Debug, Clone)]
pub struct Posterior {
    layout: ParamLayout,
    z: Vec<Standardized<f64>>,
    h: Matrix<f64>,
    times: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
    prior: HyperPrior,
    nugget: f64,
    /// Squared coordinate gaps `(z_ik - z_jk)²`, row-major per pair.
    sqdist: Vec<[f64; N_IC]>,
}

impl Posterior {
    pub fn new(model: ModelKind, data: &FitData, prior: HyperPrior, nugget: f64) -> Result<Self> {
        if data.z.len() != data.series.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} design rows but {} series",
                data.z.len(),
                data.series.len()
            )));
        }
        if !(nugget >= 0.0) || !nugget.is_finite() {
            return Err(Error::invalid("nugget must be finite and non-negative"));
        }
        let n = data.z.len();
        let mut sqdist = Vec::with_capacity(n * n);
        for a in &data.z {
            for b in &data.z {
                sqdist.push(std::array::from_fn(|k| (a[k] - b[k]) * (a[k] - b[k])));
            }
        }
        Ok(Self {
            layout: ParamLayout::new(model, n),
            z: data.z.clone(),
            h: regressor_matrix(&data.z),
            times: data.series.iter().map(|s| s.times.clone()).collect(),
            ys: data.series.iter().map(FoSSeries::shifted).collect(),
            prior,
            nugget,
            sqdist,
        })
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn model(&self) -> ModelKind {
        self.layout.model
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn prior(&self) -> &HyperPrior {
        &self.prior
    }

    pub fn design(&self) -> &[Standardized<f64>] {
        &self.z
    }

    pub fn observations(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.times[i], &self.ys[i])
    }

    /// Log posterior of `state` on the natural scale (no Jacobian terms).
    pub fn log_posterior_state(&self, state: &ModelState) -> Result<f64> {
        let lay = &self.layout;
        let mut x = lay.pack_natural(state)?;
        for v in &mut x[lay.log_tau(0)..] {
            *v = v.ln();
        }
        let jac: f64 = x[lay.log_tau(0)..].iter().sum();
        Ok(self.eval_latent(&x, None) - jac)
    }

    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let lay = &self.layout;
        if lay.model != ModelKind::BSpline || x.len() != lay.dim() {
            return self.eval_latent(x, grad);
        }
        let mut xa = x.to_vec();
        for (a1, a2) in lay.gap_slots() {
            xa[a2] = x[a1] - x[a2].exp();
        }
        let mut lp = self.eval_latent(&xa, grad.as_deref_mut());
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        for (a1, a2) in lay.gap_slots() {
            lp += x[a2];
            if let Some(g) = grad.as_deref_mut() {
                let ga2 = g[a2];
                g[a1] += ga2;
                g[a2] = 1.0 - x[a2].exp() * ga2;
            }
        }
        lp
    }

    /// Log density with the `A2` slots holding `A2` itself.
    fn eval_latent(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let lay = &self.layout;
        let n = lay.n_runs;
        let k = lay.n_outputs();
        let bspline = lay.model == ModelKind::BSpline;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        if x.len() != lay.dim() || x.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let (i_omega, i_sigma) = (k - 2, k - 1);
        if bspline && (0..n).any(|i| x[lay.latent(2, i)] > x[lay.latent(1, i)]) {
            return f64::NEG_INFINITY;
        }

        let mut lp = 0.0;

        // Observation model.
        for i in 0..n {
            let gam = [
                x[lay.latent(0, i)].exp(),
                x[lay.latent(1, i)].exp(),
                if bspline { x[lay.latent(2, i)].exp() } else { 0.0 },
            ];
            let omega = x[lay.latent(i_omega, i)].exp();
            let sig_log = x[lay.latent(i_sigma, i)];
            let inv_var = (-2.0 * sig_log).exp();
            let (times, ys) = (&self.times[i], &self.ys[i]);
            let mut acc = [0.0; 4];
            let mut d_sigma = 0.0;
            for (&t, &y) in times.iter().zip(ys) {
                let (g, part) = value_and_log_partials(&gam, omega, bspline, t);
                let r = y - g;
                let r2 = r * r * inv_var;
                lp += -0.5 * LN_2PI - sig_log - 0.5 * r2;
                if grad.is_some() {
                    let w = r * inv_var;
                    for c in 0..4 {
                        acc[c] += w * part[c];
                    }
                    d_sigma += r2 - 1.0;
                }
            }
            if let Some(gr) = grad.as_deref_mut() {
                gr[lay.latent(0, i)] += acc[0];
                gr[lay.latent(1, i)] += acc[1];
                if bspline {
                    gr[lay.latent(2, i)] += acc[2];
                }
                gr[lay.latent(i_omega, i)] += acc[3];
                gr[lay.latent(i_sigma, i)] += d_sigma;
            }
        }

        // GP prior on the latents.
        let delta: [f64; N_IC] = std::array::from_fn(|d| x[lay.log_delta(d)].exp());
        if n > 0 {
            let mut e = Matrix::<f64>::zeros(n, n);
            let mut u = Matrix::zeros(n, n);
            for a in 0..n {
                e[(a, a)] = 1.0;
                u[(a, a)] = 1.0 + self.nugget;
                for b in 0..a {
                    let c = smooth_correlation(&self.z[a], &self.z[b], &delta);
                    e[(a, b)] = c;
                    e[(b, a)] = c;
                    u[(a, b)] = c;
                    u[(b, a)] = c;
                }
            }
            let chol = match Cholesky::factor(&u) {
                Ok(c) => c,
                Err(_) => return f64::NEG_INFINITY,
            };
            let logdet = chol.log_det();
            let nf = n as f64;
            let mut w = grad.as_ref().map(|_| Matrix::<f64>::zeros(n, n));
            for l in 0..k {
                let beta: [f64; N_REG] = std::array::from_fn(|j| x[lay.beta(l, j)]);
                let tau = x[lay.log_tau(l)].exp();
                let r: Vec<f64> = (0..n)
                    .map(|i| x[lay.latent(l, i)] - self.h.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let alpha = chol.solve(&r);
                let q: f64 = r.iter().zip(&alpha).map(|(a, b)| a * b).sum();
                lp += -0.5 * nf * (LN_2PI + x[lay.log_tau(l)]) - 0.5 * logdet - 0.5 * q / tau;
                if let Some(gr) = grad.as_deref_mut() {
                    for i in 0..n {
                        gr[lay.latent(l, i)] -= alpha[i] / tau;
                    }
                    for j in 0..N_REG {
                        let s: f64 = (0..n).map(|i| self.h[(i, j)] * alpha[i]).sum();
                        gr[lay.beta(l, j)] += s / tau;
                    }
                    gr[lay.log_tau(l)] += -0.5 * nf + 0.5 * q / tau;
                    let w = w.as_mut().unwrap();
                    for a in 0..n {
                        for b in 0..n {
                            w[(a, b)] += alpha[a] * alpha[b] / tau;
                        }
                    }
                }
            }
            if let (Some(gr), Some(mut w)) = (grad.as_deref_mut(), w) {
                let uinv = chol.inverse();
                let kf = k as f64;
                for a in 0..n {
                    for b in 0..n {
                        w[(a, b)] -= kf * uinv[(a, b)];
                    }
                }
                for d in 0..N_IC {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..a {
                            s += 2.0 * w[(a, b)] * e[(a, b)] * self.sqdist[a * n + b][d];
                        }
                    }
                    gr[lay.log_delta(d)] += s / (delta[d] * delta[d]);
                }
            }
        }

        // Hyperpriors, with Jacobians for log τ and log δ.
        let outs = lay.model.outputs();
        for (l, &o) in outs.iter().enumerate() {
            let ic = self.prior.intercept(o);
            let sl = self.prior.slope(o);
            for j in 0..N_REG {
                let p = if j == 0 { ic } else { sl };
                let b = x[lay.beta(l, j)];
                lp += p.log_density(b);
                if let Some(gr) = grad.as_deref_mut() {
                    gr[lay.beta(l, j)] -= (b - p.mean) / (p.sd * p.sd);
                }
            }
            let lt = x[lay.log_tau(l)];
            let tau = lt.exp();
            lp += self.prior.log_density_tau(tau) + lt;
            if let Some(gr) = grad.as_deref_mut() {
                gr[lay.log_tau(l)] += -self.prior.tau_shape + self.prior.tau_scale / tau;
            }
        }
        for d in 0..N_IC {
            let ld = x[lay.log_delta(d)];
            lp += self.prior.log_density_delta(delta[d]) + ld;
            if let Some(gr) = grad.as_deref_mut() {
                gr[lay.log_delta(d)] += 1.0 - self.prior.delta_rate * delta[d];
            }
        }

        if lp.is_nan() {
            return f64::NEG_INFINITY;
        }
        if let Some(gr) = grad {
            if gr.iter().any(|v| !v.is_finite()) {
                return f64::NEG_INFINITY;
            }
        }
        lp
    }
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

/// Gaussian observation log likelihood summed over every run.
pub fn log_likelihood(state: &ModelState, data: &[FoSSeries]) -> Result<f64> {
    if state.curves.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameter sets for {} series",
            state.curves.len(),
            data.len()
        )));
    }
    let mut ll = 0.0;
    for (c, s) in state.curves.iter().zip(data) {
        if c.model() != state.model {
            return Err(Error::invalid("curve parameters do not match the model tag"));
        }
        let sigma = c.sigma();
        for (&t, &f) in s.times.iter().zip(&s.fos) {
            let r = (f - 1.0) - c.value(t);
            ll += -0.5 * LN_2PI - sigma.ln() - 0.5 * (r / sigma) * (r / sigma);
        }
    }
    Ok(ll)
}

/// Likelihood plus GP prior on the latents plus hyperpriors.
/// Returns `-inf` outside the support.
pub fn log_posterior(state: &ModelState, data: &FitData, prior: &HyperPrior) -> Result<f64> {
    let post = Posterior::new(state.model, data, prior.clone(), state.hyper.nugget)?;
    if state.hyper.validate().is_err() {
        return Ok(f64::NEG_INFINITY);
    }
    post.log_posterior_state(state)
}
