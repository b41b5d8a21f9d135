//! Adaptive Metropolis-within-Gibbs: one Gaussian random-walk update per
//! coordinate, with per-coordinate scales tuned towards 44% acceptance in
//! batches during warmup.

use rand::Rng;
use rand_distr::StandardNormal;

use super::posterior::LogDensity;

pub const TARGET_ACCEPT: f64 = 0.44;
const BATCH: usize = 25;

pub struct MetropolisWithinGibbs<'a, T: LogDensity + ?Sized> {
    target: &'a T,
    x: Vec<f64>,
    lp: f64,
    log_scale: Vec<f64>,
    accepted: Vec<usize>,
    in_batch: usize,
    batches: usize,
}

impl<'a, T: LogDensity + ?Sized> MetropolisWithinGibbs<'a, T> {
    pub fn new(target: &'a T, x: Vec<f64>, init_scale: f64) -> Option<Self> {
        let lp = target.log_density(&x);
        if !lp.is_finite() {
            return None;
        }
        let d = x.len();
        Some(Self {
            target,
            x,
            lp,
            log_scale: vec![init_scale.ln(); d],
            accepted: vec![0; d],
            in_batch: 0,
            batches: 0,
        })
    }

    pub fn position(&self) -> &[f64] {
        &self.x
    }

    pub fn log_density(&self) -> f64 {
        self.lp
    }

    pub fn scales(&self) -> Vec<f64> {
        self.log_scale.iter().map(|s| s.exp()).collect()
    }

    /// One sweep over all coordinates; returns the fraction accepted.
    /// Proposals outside the support have `-inf` density and are rejected.
    pub fn sweep<R: Rng + ?Sized>(&mut self, adapt: bool, rng: &mut R) -> f64 {
        let mut n_acc = 0;
        for j in 0..self.x.len() {
            let old = self.x[j];
            let e: f64 = rng.sample(StandardNormal);
            self.x[j] = old + self.log_scale[j].exp() * e;
            let lp = self.target.log_density(&self.x);
            let u: f64 = rng.random();
            if lp.is_finite() && u.ln() < lp - self.lp {
                self.lp = lp;
                self.accepted[j] += 1;
                n_acc += 1;
            } else {
                self.x[j] = old;
            }
        }
        if adapt {
            self.in_batch += 1;
            if self.in_batch == BATCH {
                self.batches += 1;
                let step = (1.0 / (self.batches as f64).sqrt()).max(0.05);
                for (s, a) in self.log_scale.iter_mut().zip(self.accepted.iter_mut()) {
                    let rate = *a as f64 / BATCH as f64;
                    if rate > TARGET_ACCEPT {
                        *s += step;
                    } else {
                        *s -= step;
                    }
                    *a = 0;
                }
                self.in_batch = 0;
            }
        }
        n_acc as f64 / self.x.len().max(1) as f64
    }
}
