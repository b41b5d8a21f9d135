//! Latin hypercube designs over the initial-condition box and a synthetic
//! stand-in for the slope simulator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoSSeries, Run, DEFAULT_HORIZON, MIN_OBSERVATIONS};
use crate::error::{Error, Result};
use crate::fos_models::{CurveParams, ModelKind};
use crate::gp_emulator::{InitialConditions, N_IC};

/// Number of random Latin hypercubes compared by the maximin criterion.
pub const MAXIMIN_CANDIDATES: usize = 50;

/// Closed interval for one initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Design box for the five initial conditions. Permeability is in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcRanges {
    pub height: Range,
    pub angle: Range,
    pub cohesion: Range,
    pub friction_angle: Range,
    pub permeability: Range,
}

impl Default for IcRanges {
    fn default() -> Self {
        Self::table1()
    }
}

impl IcRanges {
    /// Ranges of the published computer experiment.
    pub const fn table1() -> Self {
        Self {
            height: Range::new(4.0, 20.0),
            angle: Range::new(7.6, 63.4),
            cohesion: Range::new(3.0, 10.0),
            friction_angle: Range::new(18.5, 25.0),
            permeability: Range::new(0.145e-8, 2.5e-8),
        }
    }

    pub fn as_array(&self) -> [Range; N_IC] {
        [self.height, self.angle, self.cohesion, self.friction_angle, self.permeability]
    }

    pub fn validate(&self) -> Result<()> {
        let names = ["height", "angle", "cohesion", "friction angle", "permeability"];
        let problems: Vec<String> = self
            .as_array()
            .iter()
            .zip(names)
            .filter(|(r, _)| !(r.lo.is_finite() && r.hi.is_finite() && r.hi > r.lo))
            .map(|(r, n)| format!("{n} range [{}, {}] is degenerate", r.lo, r.hi))
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    pub fn contains(&self, x: &InitialConditions<f64>) -> bool {
        let v = [x.height, x.angle, x.cohesion, x.friction_angle, x.permeability];
        self.as_array().iter().zip(v).all(|(r, v)| r.contains(v))
    }

    pub fn from_unit(&self, u: &[f64; N_IC]) -> InitialConditions<f64> {
        let r = self.as_array();
        let v: [f64; N_IC] = std::array::from_fn(|k| r[k].lo + u[k] * r[k].width());
        InitialConditions::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn to_unit(&self, x: &InitialConditions<f64>) -> [f64; N_IC] {
        let r = self.as_array();
        let v = [x.height, x.angle, x.cohesion, x.friction_angle, x.permeability];
        std::array::from_fn(|k| (v[k] - r[k].lo) / r[k].width())
    }

    /// Coordinates rescaled to `[-1, 1]` over the box.
    pub fn to_symmetric(&self, x: &InitialConditions<f64>) -> [f64; N_IC] {
        self.to_unit(x).map(|u| 2.0 * u - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub run_ids: Vec<u32>,
    pub points: Vec<InitialConditions<f64>>,
    pub seed: u64,
    pub ranges: IcRanges,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn pairs(&self) -> Vec<(u32, InitialConditions<f64>)> {
        self.run_ids.iter().copied().zip(self.points.iter().copied()).collect()
    }
}

fn random_lhs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<[f64; N_IC]> {
    let mut pts = vec![[0.0; N_IC]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..N_IC {
        perm.shuffle(rng);
        for (i, &cell) in perm.iter().enumerate() {
            pts[i][k] = (cell as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

fn min_pairwise_distance(pts: &[[f64; N_IC]]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..pts.len() {
        for b in 0..a {
            let d: f64 = (0..N_IC).map(|k| (pts[a][k] - pts[b][k]).powi(2)).sum();
            best = best.min(d);
        }
    }
    best.sqrt()
}

/// Maximin Latin hypercube in the unit cube: the best of
/// [`MAXIMIN_CANDIDATES`] random hypercubes by minimum pairwise distance.
pub fn lhs_unit(n: usize, seed: u64) -> Vec<[f64; N_IC]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = random_lhs(n, &mut rng);
    let mut best_d = min_pairwise_distance(&best);
    for _ in 1..MAXIMIN_CANDIDATES {
        let cand = random_lhs(n, &mut rng);
        let d = min_pairwise_distance(&cand);
        if d > best_d {
            best = cand;
            best_d = d;
        }
    }
    best
}

/// Latin hypercube design over `ranges` with run ids `1..=n`.
pub fn lhs_design(n: usize, ranges: &IcRanges, seed: u64) -> Result<Design> {
    if n == 0 {
        return Err(Error::invalid("design size must be at least 1"));
    }
    ranges.validate()?;
    let pts = lhs_unit(n, seed);
    Ok(Design {
        run_ids: (1..=n as u32).collect(),
        points: pts.iter().map(|u| ranges.from_unit(u)).collect(),
        seed,
        ranges: *ranges,
    })
}

/// `intercept + slopes · s + jitter_sd · N(0, 1)`, where `s` are the
/// initial conditions rescaled to `[-1, 1]` over the design box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinear {
    pub intercept: f64,
    pub slopes: [f64; N_IC],
    pub jitter_sd: f64,
}

impl LogLinear {
    pub const fn new(intercept: f64, slopes: [f64; N_IC], jitter_sd: f64) -> Self {
        Self {
            intercept,
            slopes,
            jitter_sd,
        }
    }

    pub fn eval<R: Rng + ?Sized>(&self, s: &[f64; N_IC], rng: &mut R) -> f64 {
        let lin: f64 = self.intercept + self.slopes.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
        let e: f64 = rng.sample(StandardNormal);
        lin + self.jitter_sd * e
    }
}

/// Maps initial conditions to true curve parameters.
///
/// Taller and steeper slopes get smaller `A0` and `Omega`, so they start
/// closer to failure and fail sooner; stronger material does the opposite.
/// For the B-spline, `A2 = A1 + a2_offset` with the offset capped at zero so
/// the curve never rises after the knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthGenerator {
    pub model: ModelKind,
    pub ranges: IcRanges,
    pub a0: LogLinear,
    pub a1: LogLinear,
    pub a2_offset: LogLinear,
    pub omega: LogLinear,
    pub sigma: LogLinear,
}

impl Default for TruthGenerator {
    fn default() -> Self {
        Self::two_regime()
    }
}

impl TruthGenerator {
    /// B-spline truth with a fast early decline followed by a slow phase.
    pub fn two_regime() -> Self {
        Self {
            model: ModelKind::BSpline,
            ranges: IcRanges::table1(),
            a0: LogLinear::new(0.8f64.ln(), [-0.15, -0.2, 0.15, 0.1, 0.0], 0.05),
            a1: LogLinear::new(0.25f64.ln(), [-0.1, -0.1, 0.1, 0.05, 0.0], 0.05),
            a2_offset: LogLinear::new(0.8f64.ln(), [0.0; N_IC], 0.05),
            omega: LogLinear::new(100f64.ln(), [-0.35, -0.45, 0.3, 0.2, -0.15], 0.05),
            sigma: LogLinear::new(0.03f64.ln(), [0.0; N_IC], 0.1),
        }
    }

    /// Single-quadratic truth.
    pub fn quadratic() -> Self {
        Self {
            model: ModelKind::Quadratic,
            a1: LogLinear::new(0.5f64.ln(), [-0.1, -0.1, 0.1, 0.05, 0.0], 0.05),
            ..Self::two_regime()
        }
    }

    pub fn params<R: Rng + ?Sized>(&self, x: &InitialConditions<f64>, rng: &mut R) -> CurveParams<f64> {
        let s = self.ranges.to_symmetric(x);
        let a0 = self.a0.eval(&s, rng);
        let a1 = self.a1.eval(&s, rng);
        let off = self.a2_offset.eval(&s, rng).min(0.0);
        let om = self.omega.eval(&s, rng);
        let sg = self.sigma.eval(&s, rng);
        let lat = match self.model {
            ModelKind::Quadratic => vec![a0, a1, om, sg],
            ModelKind::BSpline => vec![a0, a1, a1 + off, om, sg],
        };
        CurveParams::from_latents(self.model, &lat).expect("latent count matches model")
    }
}

/// First grid time at which a noisy curve has failed: `Y ≤ 0`, or `t ≥ ω`
/// where the deterministic curve is already zero.
pub fn has_failed(y: f64, t: f64, omega: f64) -> bool {
    y <= 0.0 || t >= omega
}

/// Yearly series `t = 0, 1, …` of `1 + g(t) + ε`, stopping before the first
/// failure or after the horizon.
pub fn simulate_series<R: Rng + ?Sized>(
    run_id: u32,
    params: &CurveParams<f64>,
    horizon: f64,
    rng: &mut R,
) -> (FoSSeries, Option<f64>) {
    let sigma = params.sigma();
    let omega = params.omega();
    let mut times = Vec::new();
    let mut fos = Vec::new();
    let mut failure = None;
    let mut t = 0.0;
    while t <= horizon {
        let e: f64 = rng.sample(StandardNormal);
        let y = params.value(t) + sigma * e;
        if has_failed(y, t, omega) {
            failure = Some(t);
            break;
        }
        times.push(t);
        fos.push(1.0 + y);
        t += 1.0;
    }
    (FoSSeries::new(run_id, times, fos, failure.is_none()), failure)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRun {
    pub run_id: u32,
    pub params: CurveParams<f64>,
    /// First failure year on the yearly grid, `None` when censored.
    pub ttf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub generator: TruthGenerator,
    pub horizon: f64,
    pub seed: u64,
    pub runs: Vec<TruthRun>,
    /// Runs dropped for having fewer than the minimum number of observations.
    pub dropped: Vec<u32>,
}

impl SyntheticTruth {
    pub fn run(&self, id: u32) -> Option<&TruthRun> {
        self.runs.iter().find(|r| r.run_id == id)
    }
}

fn run_rng(seed: u64, run_id: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id as u64);
    rng
}

/// Generates one series per design point. Each run has its own random
/// stream, so results do not depend on design order.
pub fn synth_generate(
    design: &Design,
    generator: &TruthGenerator,
    horizon: f64,
    seed: u64,
) -> Result<(Dataset, SyntheticTruth)> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("horizon must be finite and non-negative"));
    }
    let mut runs = Vec::new();
    let mut truth = Vec::new();
    let mut dropped = Vec::new();
    for (id, x) in design.pairs() {
        let mut rng = run_rng(seed, id);
        let params = generator.params(&x, &mut rng);
        let (series, ttf) = simulate_series(id, &params, horizon, &mut rng);
        truth.push(TruthRun { run_id: id, params, ttf });
        if series.len() < MIN_OBSERVATIONS {
            log::warn!("run {id}: only {} observations, dropped", series.len());
            dropped.push(id);
            continue;
        }
        runs.push(Run {
            run_id: id,
            ics: x,
            series,
        });
    }
    let st = SyntheticTruth {
        generator: generator.clone(),
        horizon,
        seed,
        runs: truth,
        dropped,
    };
    Ok((Dataset::new(runs), st))
}

/// Design plus synthetic data with the default generator and horizon.
pub fn default_dataset(n: usize, seed: u64) -> Result<(Design, Dataset, SyntheticTruth)> {
    let design = lhs_design(n, &IcRanges::table1(), seed)?;
    let (data, truth) = synth_generate(&design, &TruthGenerator::default(), DEFAULT_HORIZON, seed)?;
    Ok((design, data, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fos_models::{BSplineParams, QuadraticParams};

    fn occupancy_ok(pts: &[[f64; N_IC]]) -> bool {
        let n = pts.len();
        (0..N_IC).all(|k| {
            let mut hist = vec![0; n];
            for p in pts {
                hist[((p[k] * n as f64).floor() as usize).min(n - 1)] += 1;
            }
            hist.iter().all(|&c| c == 1)
        })
    }

    #[test]
    fn lhs_is_stratified_and_in_range() {
        for n in [1, 10, 75] {
            let d = lhs_design(n, &IcRanges::table1(), 42).unwrap();
            assert_eq!(d.len(), n);
            assert!(d.points.iter().all(|p| IcRanges::table1().contains(p)));
            let unit: Vec<_> = d.points.iter().map(|p| d.ranges.to_unit(p)).collect();
            assert!(occupancy_ok(&unit));
        }
    }

    #[test]
    fn maximin_beats_first_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let first = random_lhs(20, &mut rng);
        let best = lhs_unit(20, 8);
        assert!(min_pairwise_distance(&best) >= min_pairwise_distance(&first));
    }

    #[test]
    fn degenerate_ranges_rejected() {
        let mut r = IcRanges::table1();
        r.cohesion = Range::new(5.0, 5.0);
        assert!(lhs_design(5, &r, 1).is_err());
        assert!(lhs_design(0, &IcRanges::table1(), 1).is_err());
    }

    #[test]
    fn noiseless_series_stops_at_first_non_positive() {
        let p = CurveParams::BSpline(BSplineParams::from_constrained(0.8, 0.3, 0.2, 50.0, 1e-300).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, ttf) = simulate_series(3, &p, 184.0, &mut rng);
        assert!(s.times.iter().all(|&t| p.value(t) > 0.0));
        assert_eq!(s.times.len(), 50);
        assert_eq!(ttf, Some(50.0));
        assert!(!s.censored);
    }

    #[test]
    fn long_lived_runs_are_censored() {
        let p = CurveParams::Quadratic(QuadraticParams::from_constrained(0.8, 0.5, 300.0, 0.01).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (s, ttf) = simulate_series(1, &p, 184.0, &mut rng);
        assert!(s.censored);
        assert_eq!(ttf, None);
        assert_eq!(s.last_time(), Some(184.0));
        assert_eq!(s.len(), 185);
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let (_, a, ta) = default_dataset(30, 7).unwrap();
        let (_, b, tb) = default_dataset(30, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert!(a.validate().is_ok());
        for r in &ta.runs {
            assert!(r.params.check().is_ok());
        }
        assert!(a.runs.iter().any(|r| r.series.censored));
        assert!(a.runs.iter().any(|r| !r.series.censored));
    }

    proptest::proptest! {
        #[test]
        fn lhs_one_point_per_stratum(n in 1usize..40, seed in 0u64..1000) {
            let pts = lhs_unit(n, seed);
            proptest::prop_assert_eq!(pts.len(), n);
            proptest::prop_assert!(occupancy_ok(&pts));
        }
    }
}
