//! Starting points: per-run least-squares curve fits plus prior-mean
//! hyperparameters, jittered per chain.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::fos_models::{value_and_log_partials, ModelKind};
use crate::linalg::{Cholesky, Matrix};

use super::posterior::Posterior;

/// Smallest control coefficient used when projecting fits onto the support.
const GAMMA_FLOOR: f64 = 1e-3;
const SIGMA_FLOOR: f64 = 1e-3;
/// Smallest starting value of `A1 - A2` for the B-spline.
const GAP_FLOOR: f64 = 1e-3;
/// Censored runs start with ω at this multiple of the last observed time.
pub const CENSORED_OMEGA_FACTOR: f64 = 1.5;

fn fit_fixed_omega(bspline: bool, times: &[f64], ys: &[f64], omega: f64) -> Option<([f64; 3], f64)> {
    let p = if bspline { 3 } else { 2 };
    let mut xtx = Matrix::zeros(p, p);
    let mut xty = vec![0.0; p];
    let mut rows = Vec::with_capacity(times.len());
    for (&t, &y) in times.iter().zip(ys) {
        let (_, b) = value_and_log_partials(&[1.0, 1.0, 1.0], omega, bspline, t);
        for a in 0..p {
            xty[a] += b[a] * y;
            for c in 0..p {
                xtx[(a, c)] += b[a] * b[c];
            }
        }
        rows.push(b);
    }
    let ridge = 1e-9 * (0..p).map(|a| xtx[(a, a)]).sum::<f64>().max(1e-12);
    for a in 0..p {
        xtx[(a, a)] += ridge;
    }
    let sol = Cholesky::factor(&xtx).ok()?.solve(&xty);
    let mut gam = [0.0; 3];
    for a in 0..p {
        gam[a] = sol[a].max(GAMMA_FLOOR);
    }
    if bspline {
        gam[2] = gam[2].min(gam[1]);
    }
    let sse: f64 = rows
        .iter()
        .zip(ys)
        .map(|(b, &y)| {
            let g: f64 = (0..p).map(|a| gam[a] * b[a]).sum();
            (y - g) * (y - g)
        })
        .sum();
    Some((gam, sse))
}

/// Least-squares latents `(A0, A1, [A2], Omega, Sigma)` for one series of
/// shifted observations. `None` when the series is too short to fit.
pub fn least_squares_latents(model: ModelKind, times: &[f64], ys: &[f64], censored: bool) -> Option<Vec<f64>> {
    let bspline = model == ModelKind::BSpline;
    let last = *times.last()?;
    if times.len() < 2 || !(last > 0.0) {
        return None;
    }
    let candidates: Vec<f64> = if censored {
        vec![CENSORED_OMEGA_FACTOR * last]
    } else {
        (1..=100).map(|k| last * (1.0 + 0.02 * k as f64)).collect()
    };
    let (mut best, mut best_sse, mut best_omega) = ([0.0; 3], f64::INFINITY, candidates[0]);
    for &w in &candidates {
        if let Some((g, sse)) = fit_fixed_omega(bspline, times, ys, w) {
            if sse < best_sse {
                best = g;
                best_sse = sse;
                best_omega = w;
            }
        }
    }
    if !best_sse.is_finite() {
        return None;
    }
    let sigma = (best_sse / times.len() as f64).sqrt().max(SIGMA_FLOOR);
    let mut lat = vec![best[0].ln(), best[1].ln()];
    if bspline {
        lat.push(best[2].ln());
    }
    lat.push(best_omega.ln());
    lat.push(sigma.ln());
    Some(lat)
}

/// Deterministic centre of the starting distribution.
pub fn initial_point(post: &Posterior, censored: &[bool]) -> Vec<f64> {
    let lay = post.layout();
    let model = lay.model;
    let prior = post.prior();
    let hyper = prior.mean_hyper(model, post.nugget());
    let mut x = vec![0.0; lay.dim()];
    for i in 0..lay.n_runs {
        let (times, ys) = post.observations(i);
        let fallback: Vec<f64> = (0..lay.n_outputs()).map(|l| hyper.beta[l][0]).collect();
        let mut lat = least_squares_latents(model, times, ys, censored.get(i).copied().unwrap_or(false))
            .unwrap_or(fallback);
        if model == ModelKind::BSpline {
            lat[2] = (lat[1] - lat[2]).max(GAP_FLOOR).ln();
        }
        for (l, v) in lat.into_iter().enumerate() {
            x[lay.latent(l, i)] = v;
        }
    }
    for l in 0..lay.n_outputs() {
        for j in 0..hyper.beta[l].len() {
            x[lay.beta(l, j)] = hyper.beta[l][j];
        }
        x[lay.log_tau(l)] = hyper.tau[l].ln();
    }
    for d in 0..hyper.delta.len() {
        x[lay.log_delta(d)] = hyper.delta[d].ln();
    }
    x
}

/// Small seeded perturbation of the centre.
pub fn jitter<R: Rng + ?Sized>(post: &Posterior, centre: &[f64], rng: &mut R) -> Vec<f64> {
    let lay = post.layout();
    centre
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            let scale = if lay.is_hyper(p) { 0.2 } else { 0.02 };
            v + scale * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fos_models::BSplineParams;

    #[test]
    fn recovers_exact_quadratic() {
        let times: Vec<f64> = (0..40).map(|t| t as f64).collect();
        let ys: Vec<f64> = times
            .iter()
            .map(|&t| {
                let u = t / 45.0;
                0.8 * (1.0 - u).powi(2) + 0.5 * 2.0 * u * (1.0 - u)
            })
            .collect();
        let lat = least_squares_latents(ModelKind::Quadratic, &times, &ys, false).unwrap();
        assert!((lat[0].exp() - 0.8).abs() < 0.02, "{lat:?}");
        assert!((lat[2].exp() - 45.0).abs() < 1.0, "{lat:?}");
    }

    #[test]
    fn bspline_fit_satisfies_support() {
        let p = BSplineParams::from_constrained(1.0, 0.4, 0.35, 80.0, 0.02).unwrap();
        let times: Vec<f64> = (0..79).map(|t| t as f64).collect();
        let ys: Vec<f64> = times.iter().map(|&t| p.value(t)).collect();
        let lat = least_squares_latents(ModelKind::BSpline, &times, &ys, false).unwrap();
        assert!(lat[2] <= lat[1]);
        assert!((lat[3].exp() - 80.0).abs() < 3.0, "{lat:?}");
    }

    #[test]
    fn censored_start_uses_fixed_factor() {
        let times: Vec<f64> = (0..=184).map(|t| t as f64).collect();
        let ys = vec![0.5; times.len()];
        let lat = least_squares_latents(ModelKind::Quadratic, &times, &ys, true).unwrap();
        assert!((lat[2].exp() - 1.5 * 184.0).abs() < 1e-9);
        assert!(least_squares_latents(ModelKind::Quadratic, &[0.0], &[1.0], false).is_none());
    }
}
