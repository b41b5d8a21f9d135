//! Mean squared error, CRPS, and paired quadratic vs B-spline comparison.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::data::FoSSeries;
use crate::error::{Error, Result};
use crate::prediction::PredictionBand;
use crate::stats;

/// Squared errors `(m_t - x_t)²` and their mean.
pub fn mse(pred: &[f64], obs: &[f64]) -> Result<(Vec<f64>, f64)> {
    if pred.len() != obs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} observations",
            pred.len(),
            obs.len()
        )));
    }
    let se: Vec<f64> = pred.iter().zip(obs).map(|(m, x)| (m - x) * (m - x)).collect();
    let mean = stats::mean(&se);
    Ok((se, mean))
}

/// Empirical CRPS of a sample forecast, by the sorted-sample identity
/// `(1/M)Σ|X - x| - (1/M²)Σ(2i - M - 1)X_(i)`.
pub fn crps_empirical(samples: &[f64], x: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("CRPS needs at least one sample"));
    }
    let m = samples.len() as f64;
    let s = stats::sorted(samples);
    let abs: f64 = s.iter().map(|v| (v - x).abs()).sum::<f64>() / m;
    let spread: f64 = s
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i + 1) as f64 - m - 1.0) * v)
        .sum::<f64>()
        / (m * m);
    Ok((abs - spread).max(0.0))
}

/// Closed-form CRPS of `N(mu, sigma²)`.
pub fn crps_gaussian(mu: f64, sigma: f64, x: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let n = Normal::standard();
    let z = (x - mu) / sigma;
    Ok(sigma * (z * (2.0 * n.cdf(z) - 1.0) + 2.0 * n.pdf(z) - 1.0 / std::f64::consts::PI.sqrt()))
}

/// Per-observation scores of one run under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub run_id: u32,
    pub times: Vec<f64>,
    pub se: Vec<f64>,
    pub crps: Vec<f64>,
}

impl RunScore {
    pub fn mean_mse(&self) -> f64 {
        stats::mean(&self.se)
    }

    pub fn mean_crps(&self) -> f64 {
        stats::mean(&self.crps)
    }
}

/// Scores the observations of `series` that fall on the band's grid. The
/// band must carry per-draw curves.
pub fn score_run(band: &PredictionBand, series: &FoSSeries) -> Result<RunScore> {
    let curves = band
        .curves
        .as_ref()
        .ok_or_else(|| Error::invalid("scoring needs per-draw curves in the band"))?;
    let mut out = RunScore {
        run_id: series.run_id,
        times: Vec::new(),
        se: Vec::new(),
        crps: Vec::new(),
    };
    let mut col = vec![0.0; curves.len()];
    for (&t, &x) in series.times.iter().zip(&series.fos) {
        let Some(j) = band.grid.iter().position(|&g| (g - t).abs() < 1e-9) else {
            continue;
        };
        for (c, row) in col.iter_mut().zip(curves) {
            *c = row[j];
        }
        out.times.push(t);
        out.se.push((band.mean[j] - x).powi(2));
        out.crps.push(crps_empirical(&col, x)?);
    }
    if out.times.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "run {}: no observation lies on the prediction grid",
            series.run_id
        )));
    }
    Ok(out)
}

/// Tukey boxplot summary with 1.5·IQR whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: usize,
}

impl BoxSummary {
    pub fn new(x: &[f64]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("boxplot of an empty sample"));
        }
        let s = stats::sorted(x);
        let q1 = stats::quantile_sorted(&s, 0.25);
        let q3 = stats::quantile_sorted(&s, 0.75);
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = s.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
        Ok(Self {
            n: s.len(),
            q1,
            median: stats::quantile_sorted(&s, 0.5),
            q3,
            lower_whisker: inside.first().copied().unwrap_or(q1),
            upper_whisker: inside.last().copied().unwrap_or(q3),
            outliers: s.len() - inside.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub run_id: u32,
    pub time: f64,
    pub mse_q: f64,
    pub mse_bs: f64,
    pub crps_q: f64,
    pub crps_bs: f64,
}

impl ScoreRow {
    pub fn d_mse(&self) -> f64 {
        self.mse_q - self.mse_bs
    }

    pub fn d_crps(&self) -> f64 {
        self.crps_q - self.crps_bs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub run_id: u32,
    pub d_mse: BoxSummary,
    pub d_crps: BoxSummary,
    pub median_crps_bs: f64,
}

/// Paired per-time differences, quadratic minus B-spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub runs: Vec<RunComparison>,
}

impl ScoreTable {
    /// Median over runs of each run's median CRPS difference.
    pub fn median_run_d_crps(&self) -> f64 {
        stats::median(&self.runs.iter().map(|r| r.d_crps.median).collect::<Vec<_>>())
    }

    /// Median over runs of each run's median B-spline CRPS.
    pub fn median_run_crps_bs(&self) -> f64 {
        stats::median(&self.runs.iter().map(|r| r.median_crps_bs).collect::<Vec<_>>())
    }
}

pub fn compare_models(quad: &[RunScore], bspline: &[RunScore]) -> Result<ScoreTable> {
    let mut problems = Vec::new();
    if quad.len() != bspline.len() {
        problems.push(format!("{} quadratic runs vs {} B-spline runs", quad.len(), bspline.len()));
    }
    for (q, b) in quad.iter().zip(bspline) {
        if q.run_id != b.run_id {
            problems.push(format!("run {} paired with run {}", q.run_id, b.run_id));
        } else if q.times != b.times {
            problems.push(format!("run {}: score grids differ", q.run_id));
        }
    }
    if !problems.is_empty() {
        return Err(Error::DataValidation(problems));
    }
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (q, b) in quad.iter().zip(bspline) {
        let start = rows.len();
        for j in 0..q.times.len() {
            rows.push(ScoreRow {
                run_id: q.run_id,
                time: q.times[j],
                mse_q: q.se[j],
                mse_bs: b.se[j],
                crps_q: q.crps[j],
                crps_bs: b.crps[j],
            });
        }
        let r = &rows[start..];
        runs.push(RunComparison {
            run_id: q.run_id,
            d_mse: BoxSummary::new(&r.iter().map(ScoreRow::d_mse).collect::<Vec<_>>())?,
            d_crps: BoxSummary::new(&r.iter().map(ScoreRow::d_crps).collect::<Vec<_>>())?,
            median_crps_bs: stats::median(&b.crps),
        });
    }
    Ok(ScoreTable { rows, runs })
}
