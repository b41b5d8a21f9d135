//! Posterior evaluation and MCMC for the hierarchical model.
//!
//! The default sampler is a multinomial NUTS with diagonal metric adaptation;
//! an adaptive Metropolis-within-Gibbs sampler is available as a gradient-free
//! fallback. Chains run in parallel and are reproducible from the seed.

mod diagnostics;
mod draws;
mod init;
mod mwg;
mod nuts;
mod posterior;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagnostics::{
    chains_disjoint, diagnostics, ess, ess_bulk, ess_tail, split_rhat, summarize_param, DiagnosticsReport,
    ParamSummary, RHAT_THRESHOLD,
};
pub use draws::{ChainStats, PosteriorDraws};
pub use init::{least_squares_latents, CENSORED_OMEGA_FACTOR};
pub use mwg::MetropolisWithinGibbs;
pub use nuts::{Adapter, Nuts, NutsSettings, TransitionInfo};
pub use posterior::{log_likelihood, log_posterior, LogDensity, ParamLayout, Posterior};

use crate::data::{Dataset, FoSSeries};
use crate::error::{Error, Result};
use crate::fos_models::{CurveParams, ModelKind};
use crate::gp_emulator::{EmulatorHyper, HyperPrior, Standardized, StandardizationStats, DEFAULT_NUGGET};

/// Attempts at finding a finite starting point per chain.
pub const INIT_RETRIES: usize = 20;

/// Training data as seen by the posterior: standardized inputs and series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitData {
    pub run_ids: Vec<u32>,
    pub z: Vec<Standardized<f64>>,
    pub series: Vec<FoSSeries>,
}

impl FitData {
    pub fn from_dataset(data: &Dataset, stats: &StandardizationStats<f64>) -> Result<Self> {
        Ok(Self {
            run_ids: data.run_ids(),
            z: data.standardized(stats)?,
            series: data.runs.iter().map(|r| r.series.clone()).collect(),
        })
    }

    /// Runs without observations, so the latents follow their GP prior.
    pub fn prior_only(z: Vec<Standardized<f64>>) -> Self {
        let n = z.len();
        Self {
            run_ids: (0..n as u32).collect(),
            series: (0..n as u32).map(|i| FoSSeries::new(i, vec![], vec![], false)).collect(),
            z,
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Latent curve parameters for every run plus emulator hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub model: ModelKind,
    pub curves: Vec<CurveParams<f64>>,
    pub hyper: EmulatorHyper<f64>,
}

impl ModelState {
    pub fn check_dims(&self, n_runs: usize) -> Result<()> {
        if self.curves.len() != n_runs {
            return Err(Error::DimensionMismatch(format!(
                "{} curves for {n_runs} runs",
                self.curves.len()
            )));
        }
        if self.hyper.model != self.model || self.curves.iter().any(|c| c.model() != self.model) {
            return Err(Error::invalid("model tag mismatch inside state"));
        }
        let k = self.model.n_outputs();
        if self.hyper.beta.len() != k || self.hyper.tau.len() != k {
            return Err(Error::DimensionMismatch(format!("hyperparameters for {} outputs", self.hyper.beta.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nuts,
    Mwg,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Nuts => "nuts",
            Algorithm::Mwg => "mwg",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nuts" | "hmc" => Ok(Algorithm::Nuts),
            "mwg" | "metropolis" | "gibbs" => Ok(Algorithm::Mwg),
            other => Err(Error::invalid(format!("unknown algorithm '{other}' (expected nuts or mwg)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub chains: usize,
    /// Total iterations per chain, warmup included.
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub target_accept: f64,
    pub max_depth: usize,
    pub init_step: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 2000,
            warmup: 1000,
            seed: 1,
            algorithm: Algorithm::Nuts,
            target_accept: 0.8,
            max_depth: 10,
            init_step: 0.1,
            threads: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.chains < 1 {
            problems.push("at least one chain is required".to_string());
        }
        if self.iterations <= self.warmup {
            problems.push(format!(
                "iterations ({}) must exceed warmup ({})",
                self.iterations, self.warmup
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            problems.push("target acceptance must lie in (0, 1)".to_string());
        }
        if self.max_depth == 0 {
            problems.push("max tree depth must be positive".to_string());
        }
        if !(self.init_step > 0.0) {
            problems.push("initial step size must be positive".to_string());
        }
        if self.threads == Some(0) {
            problems.push("thread count must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    pub fn draws_per_chain(&self) -> usize {
        self.iterations - self.warmup
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);
    rng
}

type ChainOutput = (Vec<Vec<f64>>, ChainStats);

fn run_chain(post: &Posterior, censored: &[bool], cfg: &ChainConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = chain_rng(cfg.seed, chain);
    let lay = post.layout();
    let centre = init::initial_point(post, censored);
    let mut start = None;
    for attempt in 0..INIT_RETRIES {
        let x = init::jitter(post, &centre, &mut rng);
        let mut g = vec![0.0; x.len()];
        let lp = post.log_density_grad(&x, &mut g);
        if lp.is_finite() {
            start = Some(x);
            break;
        }
        log::debug!("chain {chain}: initial point {attempt} has log density {lp}");
    }
    let start = start.ok_or_else(|| {
        Error::numerical(
            "chain initialization",
            format!("log posterior not finite after {INIT_RETRIES} attempts (chain {chain})"),
        )
    })?;

    let n_keep = cfg.draws_per_chain();
    let mut rows = Vec::with_capacity(n_keep);
    let mut stats = ChainStats {
        chain,
        ..ChainStats::default()
    };
    let report_every = (cfg.iterations / 10).max(1);

    match cfg.algorithm {
        Algorithm::Nuts => {
            let settings = NutsSettings {
                max_depth: cfg.max_depth,
                target_accept: cfg.target_accept,
                init_step: cfg.init_step,
            };
            let mut sampler = Nuts::new(post, start, settings)
                .ok_or_else(|| Error::numerical("chain initialization", "non-finite start"))?;
            let mut adapter = Adapter::new(&mut sampler, cfg.warmup, &mut rng);
            let (mut acc, mut depth) = (0.0, 0.0);
            for it in 0..cfg.iterations {
                let info = sampler.transition(&mut rng);
                if it < cfg.warmup {
                    adapter.adapt(&mut sampler, &info, &mut rng);
                    if it + 1 == cfg.warmup {
                        adapter.finish(&mut sampler);
                    }
                } else {
                    acc += info.accept_stat;
                    depth += info.depth as f64;
                    stats.divergences += info.divergent as usize;
                    stats.max_depth_hits += (info.depth >= cfg.max_depth) as usize;
                    stats.n_leapfrog += info.n_leapfrog;
                    rows.push(lay.to_natural(sampler.position()));
                }
                if (it + 1) % report_every == 0 {
                    log::info!("chain {chain}: iteration {}/{}", it + 1, cfg.iterations);
                }
            }
            if cfg.warmup == 0 {
                adapter.finish(&mut sampler);
            }
            stats.step_size = sampler.step_size();
            stats.mean_accept = acc / n_keep as f64;
            stats.mean_depth = depth / n_keep as f64;
        }
        Algorithm::Mwg => {
            let mut sampler = MetropolisWithinGibbs::new(post, start, 0.05)
                .ok_or_else(|| Error::numerical("chain initialization", "non-finite start"))?;
            let mut acc = 0.0;
            for it in 0..cfg.iterations {
                let a = sampler.sweep(it < cfg.warmup, &mut rng);
                if it >= cfg.warmup {
                    acc += a;
                    rows.push(lay.to_natural(sampler.position()));
                }
                if (it + 1) % report_every == 0 {
                    log::info!("chain {chain}: iteration {}/{}", it + 1, cfg.iterations);
                }
            }
            stats.mean_accept = acc / n_keep as f64;
        }
    }
    Ok((rows, stats))
}

/// Samples `post` with the chains described by `cfg`.
pub fn sample_posterior(post: &Posterior, data: &FitData, cfg: &ChainConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    if data.len() != post.layout().n_runs {
        return Err(Error::DimensionMismatch("data does not match the posterior".into()));
    }
    let censored: Vec<bool> = data.series.iter().map(|s| s.censored).collect();
    let work = || -> Vec<Result<ChainOutput>> {
        (0..cfg.chains)
            .into_par_iter()
            .map(|c| run_chain(post, &censored, cfg, c))
            .collect()
    };
    let results = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut chains = Vec::with_capacity(cfg.chains);
    let mut stats = Vec::with_capacity(cfg.chains);
    for r in results {
        let (rows, s) = r?;
        chains.push(rows);
        stats.push(s);
    }
    PosteriorDraws::new(post.model(), data.run_ids.clone(), post.nugget(), cfg.warmup, chains, stats)
}

/// Fits `model` to `data` under the elicited priors and default nugget.
pub fn run_mcmc(data: &FitData, model: ModelKind, cfg: &ChainConfig) -> Result<PosteriorDraws> {
    let post = Posterior::new(model, data, HyperPrior::elicited(), DEFAULT_NUGGET)?;
    sample_posterior(&post, data, cfg)
}
