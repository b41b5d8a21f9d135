use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos_models::{CurveParams, ModelKind};
use crate::gp_emulator::EmulatorHyper;

use super::posterior::ParamLayout;
use super::ModelState;

/// Per-chain sampler statistics collected after warmup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub chain: usize,
    pub step_size: f64,
    pub mean_accept: f64,
    pub divergences: usize,
    pub mean_depth: f64,
    pub max_depth_hits: usize,
    pub n_leapfrog: usize,
}

/// Post-warmup draws on the natural scale, stored chain-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    model: ModelKind,
    run_ids: Vec<u32>,
    names: Vec<String>,
    nugget: f64,
    warmup: usize,
    n_chains: usize,
    n_draws: usize,
    values: Vec<f64>,
    stats: Vec<ChainStats>,
}

impl PosteriorDraws {
    /// `chains[c][d]` is the natural-scale vector of draw `d` in chain `c`.
    pub fn new(
        model: ModelKind,
        run_ids: Vec<u32>,
        nugget: f64,
        warmup: usize,
        chains: Vec<Vec<Vec<f64>>>,
        stats: Vec<ChainStats>,
    ) -> Result<Self> {
        let layout = ParamLayout::new(model, run_ids.len());
        let names = layout.names(&run_ids);
        let n_chains = chains.len();
        let n_draws = chains.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n_chains * n_draws * names.len());
        for (c, chain) in chains.into_iter().enumerate() {
            if chain.len() != n_draws {
                return Err(Error::DimensionMismatch(format!(
                    "chain {c} has {} draws, expected {n_draws}",
                    chain.len()
                )));
            }
            for row in chain {
                if row.len() != names.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "draw with {} values, expected {}",
                        row.len(),
                        names.len()
                    )));
                }
                values.extend(row);
            }
        }
        Ok(Self {
            model,
            run_ids,
            names,
            nugget,
            warmup,
            n_chains,
            n_draws,
            values,
            stats,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn run_ids(&self) -> &[u32] {
        &self.run_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn warmup(&self) -> usize {
        self.warmup
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    /// Draws per chain.
    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_total(&self) -> usize {
        self.n_chains * self.n_draws
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn chain_stats(&self) -> &[ChainStats] {
        &self.stats
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.model, self.run_ids.len())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn run_index(&self, run_id: u32) -> Result<usize> {
        self.run_ids
            .iter()
            .position(|&r| r == run_id)
            .ok_or(Error::UnknownRun(run_id))
    }

    /// The parameter vector of flat draw `s` (chain-major).
    pub fn row(&self, s: usize) -> &[f64] {
        let p = self.names.len();
        &self.values[s * p..(s + 1) * p]
    }

    pub fn get(&self, chain: usize, draw: usize, param: usize) -> f64 {
        self.row(chain * self.n_draws + draw)[param]
    }

    pub fn chain_values(&self, param: usize, chain: usize) -> Vec<f64> {
        (0..self.n_draws).map(|d| self.get(chain, d, param)).collect()
    }

    /// All draws of one parameter, chains concatenated.
    pub fn values(&self, param: usize) -> Vec<f64> {
        (0..self.n_total()).map(|s| self.row(s)[param]).collect()
    }

    pub fn values_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.index_of(name).map(|p| self.values(p))
    }

    pub fn state(&self, s: usize) -> ModelState {
        let lay = self.layout();
        lay.state_natural(self.row(s), self.nugget)
    }

    pub fn curve(&self, run_index: usize, s: usize) -> CurveParams<f64> {
        let lay = self.layout();
        let row = self.row(s);
        let lat: Vec<f64> = (0..lay.n_outputs()).map(|l| row[lay.latent(l, run_index)]).collect();
        CurveParams::from_latents(self.model, &lat).expect("latent count matches model")
    }

    pub fn hyper(&self, s: usize) -> EmulatorHyper<f64> {
        self.state(s).hyper
    }

    /// Latent vectors `A_l` over all runs for draw `s`, indexed `[l][i]`.
    pub fn latents(&self, s: usize) -> Vec<Vec<f64>> {
        let lay = self.layout();
        let row = self.row(s);
        (0..lay.n_outputs())
            .map(|l| (0..lay.n_runs).map(|i| row[lay.latent(l, i)]).collect())
            .collect()
    }

    /// Indices of `max` draws evenly spaced over all chains (all when `None`).
    pub fn thinned(&self, max: Option<usize>) -> Vec<usize> {
        let total = self.n_total();
        match max {
            Some(m) if m < total && m > 0 => (0..m).map(|k| k * total / m).collect(),
            _ => (0..total).collect(),
        }
    }
}
