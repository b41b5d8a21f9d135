//! Rank-normalized split R-hat, bulk/tail ESS and a multimodality check.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::stats::{mean, quantile_sorted, sorted, variance};

use super::draws::PosteriorDraws;

/// Parameters with split R-hat above this are flagged.
pub const RHAT_THRESHOLD: f64 = 1.05;

fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf.iter().take(n).map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Effective sample size of equal-length chains using Geyer's initial
/// monotone sequence on the combined autocorrelation.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    if m == 0 {
        return f64::NAN;
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return f64::NAN;
    }
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(&c[..n])).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let nf = n as f64;
    let mean_var = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += variance(&means);
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let rho_at = |t: usize| 1.0 - (mean_var - acov.iter().map(|a| a[t]).sum::<f64>() / m as f64) / var_plus;

    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho_at(1);
    rho[1] = odd;
    let mut s = 1;
    while s < n - 4 && even + odd > 0.0 {
        even = rho_at(s + 1);
        odd = rho_at(s + 2);
        if even + odd >= 0.0 {
            rho[s + 1] = even;
            rho[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if even > 0.0 {
        rho[max_s + 1] = even;
    }
    let mut s = 1;
    while s + 3 <= max_s {
        if rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s] {
            rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
            rho[s + 2] = rho[s + 1];
        }
        s += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + rho[max_s + 1];
    let tau = tau.max(1.0 / total.log10());
    total / tau
}

fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        // middle draw of odd-length chains is dropped
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replaces draws by normal scores of their pooled (average) ranks.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let s = all.len() as f64;
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = std.inverse_cdf((rank - 0.375) / (s + 0.25));
        for &(_, c, k) in &all[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

/// Classic potential scale reduction of equal-length chains.
fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / chains.len() as f64;
    let b_over_n = variance(&means);
    if !(w > 0.0) {
        return if b_over_n > 0.0 { f64::INFINITY } else { 1.0 };
    }
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

/// Rank-normalized split R-hat: the larger of the bulk and folded values.
/// `None` for fewer than two chains.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    if chains.len() < 2 || chains.iter().any(|c| c.len() < 4) {
        return None;
    }
    let halves = split(chains);
    let bulk = rhat_basic(&rank_normalize(&halves));
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let med = crate::stats::median(&pooled);
    let folded: Vec<Vec<f64>> = halves
        .iter()
        .map(|c| c.iter().map(|v| (v - med).abs()).collect())
        .collect();
    let tail = rhat_basic(&rank_normalize(&folded));
    Some(bulk.max(tail))
}

pub fn ess_bulk(chains: &[&[f64]]) -> f64 {
    ess(&rank_normalize(&split(chains)))
}

/// Minimum ESS of the 5% and 95% quantile indicators.
pub fn ess_tail(chains: &[&[f64]]) -> f64 {
    let pooled = sorted(&chains.iter().flat_map(|c| c.iter().copied()).collect::<Vec<_>>());
    let halves = split(chains);
    [0.05, 0.95]
        .iter()
        .map(|&p| {
            let q = quantile_sorted(&pooled, p);
            let ind: Vec<Vec<f64>> = halves
                .iter()
                .map(|c| c.iter().map(|&v| if v <= q { 1.0 } else { 0.0 }).collect())
                .collect();
            ess(&ind)
        })
        .fold(f64::INFINITY, f64::min)
}

/// True when some pair of chains has disjoint central 90% intervals.
pub fn chains_disjoint(chains: &[&[f64]]) -> bool {
    let iv: Vec<(f64, f64)> = chains
        .iter()
        .map(|c| {
            let s = sorted(c);
            (quantile_sorted(&s, 0.05), quantile_sorted(&s, 0.95))
        })
        .collect();
    for a in 0..iv.len() {
        for b in 0..a {
            if iv[a].1 < iv[b].0 || iv[b].1 < iv[a].0 {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub rhat: Option<f64>,
    pub ess_bulk: f64,
    pub ess_tail: f64,
    pub multimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_chains: usize,
    pub n_draws: usize,
    pub divergences: usize,
    pub max_depth_hits: usize,
    pub mean_accept: f64,
    pub params: Vec<ParamSummary>,
    /// Parameters with R-hat above the threshold.
    pub flagged: Vec<String>,
    /// Parameters whose chains sit in disjoint regions.
    pub multimodal: Vec<String>,
}

impl DiagnosticsReport {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Largest R-hat over the parameters accepted by `filter`.
    pub fn max_rhat(&self, filter: impl Fn(&str) -> bool) -> Option<f64> {
        self.params
            .iter()
            .filter(|p| filter(&p.name))
            .filter_map(|p| p.rhat)
            .fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }
}

pub fn summarize_param(name: &str, chains: &[&[f64]]) -> ParamSummary {
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let s = sorted(&pooled);
    let rhat = split_rhat(chains);
    ParamSummary {
        name: name.to_string(),
        mean: mean(&pooled),
        sd: variance(&pooled).sqrt(),
        q025: quantile_sorted(&s, 0.025),
        q50: quantile_sorted(&s, 0.5),
        q975: quantile_sorted(&s, 0.975),
        rhat,
        ess_bulk: ess_bulk(chains),
        ess_tail: ess_tail(chains),
        multimodal: chains.len() > 1 && chains_disjoint(chains),
    }
}

pub fn diagnostics(draws: &PosteriorDraws) -> DiagnosticsReport {
    let params: Vec<ParamSummary> = (0..draws.n_params())
        .map(|p| {
            let chains: Vec<Vec<f64>> = (0..draws.n_chains()).map(|c| draws.chain_values(p, c)).collect();
            let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
            summarize_param(&draws.names()[p], &refs)
        })
        .collect();
    let flagged = params
        .iter()
        .filter(|p| p.rhat.is_some_and(|r| !(r <= RHAT_THRESHOLD)))
        .map(|p| p.name.clone())
        .collect();
    let multimodal = params.iter().filter(|p| p.multimodal).map(|p| p.name.clone()).collect();
    let stats = draws.chain_stats();
    let mean_accept = if stats.is_empty() {
        f64::NAN
    } else {
        stats.iter().map(|s| s.mean_accept).sum::<f64>() / stats.len() as f64
    };
    DiagnosticsReport {
        n_chains: draws.n_chains(),
        n_draws: draws.n_draws(),
        divergences: stats.iter().map(|s| s.divergences).sum(),
        max_depth_hits: stats.iter().map(|s| s.max_depth_hits).sum(),
        mean_accept,
        params,
        flagged,
        multimodal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| { let e: f64 = StandardNormal.sample(&mut rng); shift + e }).collect()
    }

    #[test]
    fn identical_chains_give_unit_rhat() {
        // Identical copies whose two halves also coincide: no between-chain
        // variance at all, so R-hat reduces to sqrt((n - 1) / n).
        let half = iid(1, 500, 0.0);
        let c: Vec<f64> = half.iter().chain(&half).copied().collect();
        let chains = [c.as_slice(); 4];
        let r = split_rhat(&chains).unwrap();
        assert!((r - (499.0f64 / 500.0).sqrt()).abs() < 1e-12, "{r}");
        assert!((r - 1.0).abs() < 1.0 / 500.0);
    }

    #[test]
    fn iid_chains_converge() {
        let chains: Vec<Vec<f64>> = (0..4).map(|s| iid(10 + s, 1000, 0.0)).collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let r = split_rhat(&refs).unwrap();
        assert!(r < 1.01, "{r}");
        let e = ess_bulk(&refs);
        assert!(e > 3000.0 && e < 5000.0, "{e}");
        assert!(ess_tail(&refs) > 2500.0);
        assert!(!chains_disjoint(&refs));
    }

    #[test]
    fn separated_chains_are_flagged() {
        let a = iid(3, 1000, -10.0);
        let b = iid(4, 1000, 10.0);
        let r = split_rhat(&[&a, &b]).unwrap();
        assert!(r > 1.5, "{r}");
        assert!(chains_disjoint(&[&a, &b]));
    }

    #[test]
    fn single_chain_has_no_rhat() {
        let a = iid(5, 500, 0.0);
        assert!(split_rhat(&[&a]).is_none());
        assert!(ess_bulk(&[&a]) > 300.0);
    }

    #[test]
    fn autocorrelated_chain_has_lower_ess() {
        let e = iid(6, 4000, 0.0);
        let mut ar = vec![0.0; 4000];
        for i in 1..4000 {
            ar[i] = 0.9 * ar[i - 1] + e[i];
        }
        let ess = ess_bulk(&[&ar]);
        // AR(1) with phi 0.9: n (1 - phi) / (1 + phi) ≈ 210
        assert!(ess > 100.0 && ess < 400.0, "{ess}");
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let x = iid(7, 50, 1.0);
        let a = autocovariance(&x);
        let m = mean(&x);
        for t in [0, 1, 5, 20] {
            let d: f64 = (0..50 - t).map(|i| (x[i] - m) * (x[i + t] - m)).sum::<f64>() / 50.0;
            assert!((a[t] - d).abs() < 1e-12);
        }
    }
}
