//! Posterior factor-of-safety bands, predicted time to failure, and
//! out-of-sample prediction by conditioning the emulator on posterior latents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FoSSeries;
use crate::error::{Error, Result};
use crate::fos_models::{CurveParams, ModelKind};
use crate::gp_emulator::{
    correlation, correlation_matrix, regressor, EmulatorHyper, InitialConditions, StandardizationStats, Standardized,
    A2_RESAMPLE_LIMIT,
};
use crate::inference::PosteriorDraws;
use crate::linalg::{dot, Cholesky};
use crate::stats;

pub const DEFAULT_STEP: f64 = 1.0;
/// Conditional variances above `-VARIANCE_TOLERANCE` are rounded up to zero.
pub const VARIANCE_TOLERANCE: f64 = 1e-12;
/// Upper bound on grid steps simulated per draw when searching for failure.
const MAX_TTF_STEPS: usize = 1_000_000;

const FOS_TAG: u64 = 1;
const TTF_TAG: u64 = 2;
const LATENT_TAG: u64 = 3;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn keyed_rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(parts.iter().fold(0, |h, &p| mix(h ^ p)))
}

/// Standard normal keyed by `(seed, tag, draw, t)`. The same year gets the
/// same noise on every grid that contains it.
fn keyed_normal(seed: u64, tag: u64, draw: usize, t: f64) -> f64 {
    keyed_rng(&[seed, tag, draw as u64, t.to_bits()]).sample(StandardNormal)
}

/// `start, start + step, …` up to and including `end` (within rounding).
pub fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
        return Err(Error::invalid(format!("bad grid [{start}, {end}] step {step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictOptions {
    pub seed: u64,
    /// Evenly thinned subset of posterior draws; all draws when `None`.
    pub max_draws: Option<usize>,
    pub keep_curves: bool,
    /// Grid step for predicted time to failure.
    pub step: f64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            max_draws: None,
            keep_curves: false,
            step: DEFAULT_STEP,
        }
    }
}

/// Pointwise predictive mean and central 95% interval of FoS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBand {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<Vec<f64>>>,
}

impl PredictionBand {
    /// `fos[s][j]` is the noisy FoS of draw `s` at `grid[j]`; `det[s][j]`
    /// the deterministic part. The mean averages the deterministic part,
    /// which is the exact predictive mean given each draw.
    fn from_samples(grid: Vec<f64>, det: &[Vec<f64>], fos: Vec<Vec<f64>>, keep: bool) -> Result<Self> {
        if fos.is_empty() {
            return Err(Error::invalid("no posterior draws to summarise"));
        }
        let m = grid.len();
        let mut mean = Vec::with_capacity(m);
        let mut lo = Vec::with_capacity(m);
        let mut hi = Vec::with_capacity(m);
        let mut col = vec![0.0; fos.len()];
        for j in 0..m {
            for (c, row) in col.iter_mut().zip(&fos) {
                *c = row[j];
            }
            let s = stats::sorted(&col);
            lo.push(stats::quantile_sorted(&s, 0.025));
            hi.push(stats::quantile_sorted(&s, 0.975));
            mean.push(1.0 + det.iter().map(|r| r[j]).sum::<f64>() / det.len() as f64);
        }
        Ok(Self {
            grid,
            mean,
            lo95: lo,
            hi95: hi,
            curves: keep.then_some(fos),
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Observations of `series` falling on the grid, and how many of them
    /// lie inside the band.
    pub fn coverage(&self, series: &FoSSeries) -> Coverage {
        let mut c = Coverage::default();
        for (&t, &y) in series.times.iter().zip(&series.fos) {
            if let Some(j) = self.grid.iter().position(|&g| (g - t).abs() < 1e-9) {
                c.total += 1;
                if y >= self.lo95[j] && y <= self.hi95[j] {
                    c.inside += 1;
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub inside: usize,
    pub total: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.inside as f64 / self.total as f64
        }
    }

    pub fn add(self, other: Coverage) -> Coverage {
        Coverage {
            inside: self.inside + other.inside,
            total: self.total + other.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTFDistribution {
    pub rho: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtfSummary {
    pub n: usize,
    pub rho_mean: f64,
    pub rho_q025: f64,
    pub rho_q50: f64,
    pub rho_q975: f64,
    pub omega_q025: f64,
    pub omega_q50: f64,
    pub omega_q975: f64,
}

impl TTFDistribution {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn summary(&self) -> TtfSummary {
        let r = stats::sorted(&self.rho);
        let w = stats::sorted(&self.omega);
        TtfSummary {
            n: r.len(),
            rho_mean: stats::mean(&r),
            rho_q025: stats::quantile_sorted(&r, 0.025),
            rho_q50: stats::quantile_sorted(&r, 0.5),
            rho_q975: stats::quantile_sorted(&r, 0.975),
            omega_q025: stats::quantile_sorted(&w, 0.025),
            omega_q50: stats::quantile_sorted(&w, 0.5),
            omega_q975: stats::quantile_sorted(&w, 0.975),
        }
    }
}

/// First grid time `k·step`, `k ≥ 1`, at which `g + ε ≤ 0` or `t ≥ ω`.
pub fn first_failure(curve: &CurveParams<f64>, step: f64, seed: u64, draw: usize) -> f64 {
    let (omega, sigma) = (curve.omega(), curve.sigma());
    for k in 1..=MAX_TTF_STEPS {
        let t = k as f64 * step;
        if t >= omega || curve.value(t) + sigma * keyed_normal(seed, TTF_TAG, draw, t) <= 0.0 {
            return t;
        }
    }
    log::warn!("draw {draw}: no failure within {MAX_TTF_STEPS} steps");
    MAX_TTF_STEPS as f64 * step
}

fn curve_samples(curve: &CurveParams<f64>, grid: &[f64], seed: u64, draw: usize) -> (Vec<f64>, Vec<f64>) {
    let sigma = curve.sigma();
    let det: Vec<f64> = grid.iter().map(|&t| curve.value(t)).collect();
    let fos = grid
        .iter()
        .zip(&det)
        .map(|(&t, g)| 1.0 + g + sigma * keyed_normal(seed, FOS_TAG, draw, t))
        .collect();
    (det, fos)
}

/// Posterior predictive FoS band for a fitted run.
pub fn posterior_fos(draws: &PosteriorDraws, run_id: u32, grid: &[f64], opts: &PredictOptions) -> Result<PredictionBand> {
    let i = draws.run_index(run_id)?;
    let idx = draws.thinned(opts.max_draws);
    let (det, fos): (Vec<_>, Vec<_>) = idx
        .par_iter()
        .map(|&s| curve_samples(&draws.curve(i, s), grid, opts.seed, s))
        .unzip();
    PredictionBand::from_samples(grid.to_vec(), &det, fos, opts.keep_curves)
}

/// Predicted time to failure for a fitted run, one sample per draw.
pub fn predicted_ttf(draws: &PosteriorDraws, run_id: u32, opts: &PredictOptions) -> Result<TTFDistribution> {
    if !(opts.step > 0.0) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let i = draws.run_index(run_id)?;
    let idx = draws.thinned(opts.max_draws);
    let (rho, omega) = idx
        .par_iter()
        .map(|&s| {
            let c = draws.curve(i, s);
            (first_failure(&c, opts.step, opts.seed, s), c.omega())
        })
        .unzip();
    Ok(TTFDistribution { rho, omega })
}

/// Conditional normal of one latent output at a new input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditional {
    pub mean: f64,
    pub var: f64,
}

/// Factorised training correlation shared by all outputs of one draw.
pub struct Conditioner<'a> {
    z: &'a [Standardized<f64>],
    chol: Cholesky<f64>,
    delta: [f64; 5],
    nugget: f64,
}

fn check_distinct(z: &[Standardized<f64>]) -> Result<()> {
    for a in 0..z.len() {
        for b in 0..a {
            if z[a] == z[b] {
                return Err(Error::invalid(format!("training inputs {b} and {a} are repeated")));
            }
        }
    }
    Ok(())
}

impl<'a> Conditioner<'a> {
    pub fn new(z: &'a [Standardized<f64>], delta: &[f64; 5], nugget: f64) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::invalid("conditioning needs at least one training input"));
        }
        check_distinct(z)?;
        let u = correlation_matrix(z, delta, nugget)?;
        let chol = Cholesky::factor(&u).map_err(|_| {
            Error::numerical(
                "training correlation matrix",
                format!("not positive definite with nugget {nugget}; increase the nugget"),
            )
        })?;
        Ok(Self {
            z,
            chol,
            delta: *delta,
            nugget,
        })
    }

    /// `m* = h*ᵀβ + tᵀΣ⁻¹(y − Hβ)`, `v* = τ(1 + ζ − tᵀΣ⁻¹t)`.
    pub fn condition(&self, y: &[f64], beta: &[f64; 6], tau: f64, zstar: &Standardized<f64>) -> Result<Conditional> {
        if y.len() != self.z.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} latent values for {} training inputs",
                y.len(),
                self.z.len()
            )));
        }
        let t = self
            .z
            .iter()
            .map(|zi| correlation(zstar, zi, &self.delta, self.nugget))
            .collect::<Result<Vec<_>>>()?;
        let resid: Vec<f64> = y
            .iter()
            .zip(self.z)
            .map(|(&yi, zi)| yi - dot(&regressor(zi), beta))
            .collect();
        let w = self.chol.solve(&resid);
        let mean = dot(&regressor(zstar), beta) + dot(&t, &w);
        let v = self.chol.solve_lower(&t);
        let mut var = tau * (1.0 + self.nugget - dot(&v, &v));
        if var < 0.0 {
            if var < -VARIANCE_TOLERANCE {
                return Err(Error::numerical(
                    "conditional variance",
                    format!("negative variance {var:e}"),
                ));
            }
            var = 0.0;
        }
        Ok(Conditional { mean, var })
    }
}

/// Conditions output `l` of `hyper` on training latents `y` at `zstar`.
pub fn condition_latent(
    y: &[f64],
    z: &[Standardized<f64>],
    hyper: &EmulatorHyper<f64>,
    l: usize,
    zstar: &Standardized<f64>,
) -> Result<Conditional> {
    if l >= hyper.beta.len() {
        return Err(Error::IndexOutOfRange(format!("output {l} of {}", hyper.beta.len())));
    }
    Conditioner::new(z, &hyper.delta, hyper.nugget)?.condition(y, &hyper.beta[l], hyper.tau[l], zstar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOfSample {
    pub band: PredictionBand,
    pub ttf: TTFDistribution,
    /// Draws dropped because no conditioned `A2` satisfied `A2 ≤ A1`.
    pub skipped: usize,
}

fn sample_latents(
    cond: &Conditioner,
    lat: &[Vec<f64>],
    hyper: &EmulatorHyper<f64>,
    zstar: &Standardized<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>> {
    let k = lat.len();
    let mut out = Vec::with_capacity(k);
    let mut conds = Vec::with_capacity(k);
    for l in 0..k {
        let c = cond.condition(&lat[l], &hyper.beta[l], hyper.tau[l], zstar)?;
        let e: f64 = rng.sample(StandardNormal);
        out.push(c.mean + c.var.sqrt() * e);
        conds.push(c);
    }
    if hyper.model == ModelKind::BSpline && out[2] > out[1] {
        let c = conds[2];
        let ok = (0..A2_RESAMPLE_LIMIT).find_map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            let a2 = c.mean + c.var.sqrt() * e;
            (a2 <= out[1]).then_some(a2)
        });
        match ok {
            Some(a2) => out[2] = a2,
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Predicts a new input by conditioning each draw's emulator on that draw's
/// training latents. `training` holds the ICs of the fitted runs in
/// `draws.run_ids()` order.
pub fn predict_out_of_sample(
    draws: &PosteriorDraws,
    training: &[InitialConditions<f64>],
    stats: &StandardizationStats<f64>,
    xstar: &InitialConditions<f64>,
    grid: &[f64],
    opts: &PredictOptions,
) -> Result<OutOfSample> {
    if training.len() != draws.run_ids().len() {
        return Err(Error::DimensionMismatch(format!(
            "{} training inputs for {} fitted runs",
            training.len(),
            draws.run_ids().len()
        )));
    }
    if !(opts.step > 0.0) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let z: Vec<Standardized<f64>> = training.iter().map(|x| stats.standardize(x)).collect::<Result<_>>()?;
    check_distinct(&z)?;
    let zstar = stats.standardize(xstar)?;
    let model = draws.model();
    let idx = draws.thinned(opts.max_draws);
    let per_draw: Vec<Option<(Vec<f64>, Vec<f64>, f64, f64)>> = idx
        .par_iter()
        .map(|&s| -> Result<_> {
            let hyper = draws.hyper(s);
            let cond = Conditioner::new(&z, &hyper.delta, hyper.nugget)?;
            let mut rng = keyed_rng(&[opts.seed, LATENT_TAG, s as u64]);
            let Some(lat) = sample_latents(&cond, &draws.latents(s), &hyper, &zstar, &mut rng)? else {
                return Ok(None);
            };
            let curve = CurveParams::from_latents(model, &lat)?;
            let (det, fos) = curve_samples(&curve, grid, opts.seed, s);
            Ok(Some((det, fos, first_failure(&curve, opts.step, opts.seed, s), curve.omega())))
        })
        .collect::<Result<_>>()?;
    let skipped = per_draw.iter().filter(|d| d.is_none()).count();
    if skipped > 0 {
        log::warn!("{skipped} draws skipped: conditioned A2 stayed above A1");
    }
    let kept: Vec<_> = per_draw.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::numerical("out-of-sample prediction", "no draw satisfied the curve constraints"));
    }
    let mut det = Vec::with_capacity(kept.len());
    let mut fos = Vec::with_capacity(kept.len());
    let mut rho = Vec::with_capacity(kept.len());
    let mut omega = Vec::with_capacity(kept.len());
    for (d, f, r, w) in kept {
        det.push(d);
        fos.push(f);
        rho.push(r);
        omega.push(w);
    }
    Ok(OutOfSample {
        band: PredictionBand::from_samples(grid.to_vec(), &det, fos, opts.keep_curves)?,
        ttf: TTFDistribution { rho, omega },
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fos_models::{BSplineParams, QuadraticParams};
    use crate::gp_emulator::{regressor, HyperPrior, DEFAULT_NUGGET};
    use crate::inference::ChainStats;
    use crate::linalg::Matrix;

    /// Joint-normal conditioning of the last coordinate on the others, written
    /// out directly from the full covariance. Used as an oracle.
    fn brute_force(mu: &[f64], cov: &Matrix<f64>, y: &[f64]) -> (f64, f64) {
        let n = y.len();
        let s11 = Matrix::from_fn(n, n, |i, j| cov[(i, j)]);
        let s21: Vec<f64> = (0..n).map(|j| cov[(n, j)]).collect();
        let inv = Cholesky::factor(&s11).unwrap().inverse();
        let d: Vec<f64> = (0..n).map(|i| y[i] - mu[i]).collect();
        let a = inv.mul_vec(&d);
        let b = inv.mul_vec(&s21);
        (mu[n] + dot(&s21, &a), cov[(n, n)] - dot(&s21, &b))
    }

    fn random_z(rng: &mut ChaCha8Rng, n: usize) -> Vec<Standardized<f64>> {
        (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.5..1.5)))
            .collect()
    }

    #[test]
    fn conditioning_matches_joint_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prior = HyperPrior::elicited();
        for case in 0..100 {
            let n = 1 + case % 5;
            let z = random_z(&mut rng, n);
            let zstar = random_z(&mut rng, 1)[0];
            let hyper = prior.sample(ModelKind::BSpline, 1e-4, &mut rng);
            let l = case % 5;
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = condition_latent(&y, &z, &hyper, l, &zstar).unwrap();

            let mut all = z.clone();
            all.push(zstar);
            let tau = hyper.tau[l];
            let cov = Matrix::from_fn(n + 1, n + 1, |i, j| {
                let c = correlation(&all[i], &all[j], &hyper.delta, hyper.nugget).unwrap();
                tau * c
            });
            let mu: Vec<f64> = all.iter().map(|zi| dot(&regressor(zi), &hyper.beta[l])).collect();
            let (m, v) = brute_force(&mu, &cov, &y);
            assert!((got.mean - m).abs() < 1e-8 * (1.0 + m.abs()), "{case}: {} vs {m}", got.mean);
            assert!((got.var - v.max(0.0)).abs() < 1e-8 * (1.0 + v.abs()), "{case}: {} vs {v}", got.var);
        }
    }

    #[test]
    fn interpolates_without_nugget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_z(&mut rng, 4);
        let mut hyper = HyperPrior::elicited().sample(ModelKind::Quadratic, 0.0, &mut rng);
        hyper.delta = [0.5; 5];
        let y = [0.3, -0.2, 1.1, 0.7];
        for i in 0..4 {
            let c = condition_latent(&y, &z, &hyper, 0, &z[i]).unwrap();
            assert!((c.mean - y[i]).abs() < 1e-8);
            assert!(c.var.abs() < 1e-8);
        }
    }

    #[test]
    fn distant_input_reverts_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_z(&mut rng, 3);
        let hyper = EmulatorHyper {
            model: ModelKind::Quadratic,
            beta: vec![[0.5, 0.1, 0.0, 0.0, 0.0, 0.2]; 4],
            tau: vec![0.3; 4],
            delta: [0.5; 5],
            nugget: 1e-6,
        };
        let far = [50.0; 5];
        let c = condition_latent(&[1.0, 2.0, 3.0], &z, &hyper, 1, &far).unwrap();
        assert!((c.mean - (0.5 + 0.1 * 50.0 + 0.2 * 50.0)).abs() < 1e-12);
        assert!((c.var - 0.3 * (1.0 + 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn repeated_inputs_rejected() {
        let z = vec![[0.0; 5], [1.0; 5], [0.0; 5]];
        let hyper = HyperPrior::elicited().mean_hyper(ModelKind::Quadratic, DEFAULT_NUGGET);
        assert!(condition_latent(&[0.0; 3], &z, &hyper, 0, &[0.5; 5]).is_err());
    }

    fn fake_draws(curves: &[CurveParams<f64>]) -> PosteriorDraws {
        let model = curves[0].model();
        let hyper = HyperPrior::elicited().mean_hyper(model, DEFAULT_NUGGET);
        let lay = crate::inference::ParamLayout::new(model, 1);
        let rows: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| {
                let st = crate::inference::ModelState {
                    model,
                    curves: vec![*c],
                    hyper: hyper.clone(),
                };
                lay.pack_natural(&st).unwrap()
            })
            .collect();
        let stats = vec![ChainStats::default()];
        PosteriorDraws::new(model, vec![7], DEFAULT_NUGGET, 0, vec![rows], stats).unwrap()
    }

    #[test]
    fn noiseless_ttf_is_ceiling_of_omega() {
        let c = CurveParams::Quadratic(QuadraticParams::from_constrained(0.8, 0.4, 52.3, 1e-300).unwrap());
        let d = fake_draws(&[c, c]);
        let ttf = predicted_ttf(&d, 7, &PredictOptions::default()).unwrap();
        assert_eq!(ttf.rho, vec![53.0, 53.0]);
        assert!(predicted_ttf(&d, 8, &PredictOptions::default()).is_err());
    }

    #[test]
    fn noisy_ttf_fails_early_and_refines() {
        let c = CurveParams::BSpline(BSplineParams::from_constrained(0.3, 0.2, 0.1, 80.0, 0.4).unwrap());
        let d = fake_draws(&vec![c; 200]);
        let coarse = predicted_ttf(&d, 7, &PredictOptions::default()).unwrap();
        let fine = predicted_ttf(&d, 7, &PredictOptions { step: 0.5, ..Default::default() }).unwrap();
        for (f, c) in fine.rho.iter().zip(&coarse.rho) {
            assert!(f <= c);
            assert!(*c <= 80.0 && *c > 0.0);
        }
        assert!(stats::median(&coarse.rho) < 20.0);
    }

    #[test]
    fn band_collapses_without_noise_and_returns_to_one() {
        let c = CurveParams::BSpline(BSplineParams::from_constrained(0.9, 0.5, 0.3, 60.0, 1e-300).unwrap());
        let d = fake_draws(&vec![c; 10]);
        let g = grid(0.0, 80.0, 1.0).unwrap();
        let b = posterior_fos(&d, 7, &g, &PredictOptions::default()).unwrap();
        for (j, &t) in g.iter().enumerate() {
            let want = 1.0 + c.value(t);
            assert!((b.mean[j] - want).abs() < 1e-12);
            assert!((b.lo95[j] - want).abs() < 1e-12 && (b.hi95[j] - want).abs() < 1e-12);
        }
        assert_eq!(b.mean[70], 1.0);
    }

    #[test]
    fn band_is_ordered_and_covers_its_own_draws() {
        let c = CurveParams::Quadratic(QuadraticParams::from_constrained(0.8, 0.4, 90.0, 0.05).unwrap());
        let d = fake_draws(&vec![c; 2000]);
        let g = grid(0.0, 60.0, 1.0).unwrap();
        let b = posterior_fos(&d, 7, &g, &PredictOptions::default()).unwrap();
        assert!((0..g.len()).all(|j| b.lo95[j] <= b.mean[j] && b.mean[j] <= b.hi95[j]));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fos: Vec<f64> = g
            .iter()
            .map(|&t| 1.0 + c.value(t) + 0.05 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cov = b.coverage(&FoSSeries::new(7, g.clone(), fos, false));
        assert_eq!(cov.total, g.len());
        assert!(cov.fraction() > 0.85);
    }

    #[test]
    fn grid_includes_end() {
        assert_eq!(grid(0.0, 2.0, 0.5).unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(grid(0.0, 1.0, 0.0).is_err());
    }
}
