//! Simulator runs: initial conditions plus the yearly factor-of-safety series.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_emulator::{InitialConditions, Standardized, StandardizationStats};

/// Runs with fewer observations than this are not identifiable under the
/// B-spline model and are rejected at load time.
pub const MIN_OBSERVATIONS: usize = 4;

/// Default simulation horizon in years.
pub const DEFAULT_HORIZON: f64 = 184.0;

/// One computer run's factor-of-safety observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoSSeries {
    pub run_id: u32,
    pub times: Vec<f64>,
    pub fos: Vec<f64>,
    /// The run reached the horizon without failing.
    pub censored: bool,
}

impl FoSSeries {
    pub fn new(run_id: u32, times: Vec<f64>, fos: Vec<f64>, censored: bool) -> Self {
        Self {
            run_id,
            times,
            fos,
            censored,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Shifted observations `Y = FoS - 1`.
    pub fn shifted(&self) -> Vec<f64> {
        self.fos.iter().map(|f| f - 1.0).collect()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Every problem with this series, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let id = self.run_id;
        if self.times.len() != self.fos.len() {
            out.push(format!("run {id}: {} times but {} FoS values", self.times.len(), self.fos.len()));
        }
        if self.times.len() < MIN_OBSERVATIONS {
            out.push(format!(
                "run {id}: {} measurements, at least {MIN_OBSERVATIONS} required",
                self.times.len()
            ));
        }
        if self.times.iter().chain(&self.fos).any(|v| !v.is_finite()) {
            out.push(format!("run {id}: non-finite values"));
        }
        if self.times.iter().any(|&t| t < 0.0) {
            out.push(format!("run {id}: negative time"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            out.push(format!("run {id}: times are not strictly increasing"));
        }
        out
    }
}

/// A simulator run with its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub run_id: u32,
    pub ics: InitialConditions<f64>,
    pub series: FoSSeries,
}

/// Training runs in a fixed order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub runs: Vec<Run>,
}

impl Dataset {
    pub fn new(runs: Vec<Run>) -> Self {
        Self { runs }
    }

    /// Joins a design with series by run id. Runs missing from either side
    /// are reported together.
    pub fn join(design: &[(u32, InitialConditions<f64>)], series: Vec<FoSSeries>) -> Result<Self> {
        let mut by_id: BTreeMap<u32, FoSSeries> = BTreeMap::new();
        let mut problems = Vec::new();
        for s in series {
            let id = s.run_id;
            if by_id.insert(id, s).is_some() {
                problems.push(format!("run {id}: duplicated series"));
            }
        }
        let mut runs = Vec::with_capacity(design.len());
        let mut seen = BTreeSet::new();
        for &(id, ics) in design {
            if !seen.insert(id) {
                problems.push(format!("run {id}: duplicated in design"));
                continue;
            }
            match by_id.remove(&id) {
                Some(series) => runs.push(Run { run_id: id, ics, series }),
                None => problems.push(format!("run {id}: in design but has no series")),
            }
        }
        for id in by_id.keys() {
            problems.push(format!("run {id}: has a series but is not in the design"));
        }
        if !problems.is_empty() {
            return Err(Error::DataValidation(problems));
        }
        Ok(Self { runs })
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn run_ids(&self) -> Vec<u32> {
        self.runs.iter().map(|r| r.run_id).collect()
    }

    pub fn ics(&self) -> Vec<InitialConditions<f64>> {
        self.runs.iter().map(|r| r.ics).collect()
    }

    pub fn run(&self, id: u32) -> Option<&Run> {
        self.runs.iter().find(|r| r.run_id == id)
    }

    /// Checks every run and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut ids = BTreeSet::new();
        for r in &self.runs {
            if !ids.insert(r.run_id) {
                problems.push(format!("run {}: duplicated run id", r.run_id));
            }
            if r.series.run_id != r.run_id {
                problems.push(format!("run {}: series labelled {}", r.run_id, r.series.run_id));
            }
            if !r.ics.is_finite() {
                problems.push(format!("run {}: non-finite initial conditions", r.run_id));
            }
            problems.extend(r.series.problems());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::DataValidation(problems))
        }
    }

    pub fn standardization(&self) -> Result<StandardizationStats<f64>> {
        StandardizationStats::from_training(&self.ics())
    }

    pub fn standardized(&self, stats: &StandardizationStats<f64>) -> Result<Vec<Standardized<f64>>> {
        self.runs.iter().map(|r| stats.standardize(&r.ics)).collect()
    }

    /// Splits off the listed run ids, returning `(kept, held_out)`.
    pub fn split(&self, held_out: &[u32]) -> Result<(Dataset, Dataset)> {
        let missing: Vec<String> = held_out
            .iter()
            .filter(|id| self.run(**id).is_none())
            .map(|id| format!("held-out run {id} not in dataset"))
            .collect();
        if !missing.is_empty() {
            return Err(Error::DataValidation(missing));
        }
        let (out, keep): (Vec<Run>, Vec<Run>) = self
            .runs
            .iter()
            .cloned()
            .partition(|r| held_out.contains(&r.run_id));
        Ok((Dataset::new(keep), Dataset::new(out)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ics(h: f64) -> InitialConditions<f64> {
        InitialConditions::new(h, 20.0, 6.0, 21.0, 1e-8)
    }

    fn series(id: u32, n: usize) -> FoSSeries {
        FoSSeries::new(id, (0..n).map(|t| t as f64).collect(), vec![1.5; n], false)
    }

    #[test]
    fn short_series_are_reported_together() {
        let d = Dataset::new(vec![
            Run { run_id: 1, ics: ics(5.0), series: series(1, 3) },
            Run { run_id: 2, ics: ics(6.0), series: series(2, 10) },
            Run { run_id: 3, ics: ics(7.0), series: series(3, 2) },
        ]);
        match d.validate() {
            Err(Error::DataValidation(p)) => {
                assert_eq!(p.len(), 2);
                assert!(p[0].contains("run 1") && p[1].contains("run 3"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn join_reports_missing_both_ways() {
        let design = vec![(1, ics(5.0)), (2, ics(6.0))];
        let err = Dataset::join(&design, vec![series(2, 5), series(9, 5)]).unwrap_err();
        match err {
            Error::DataValidation(p) => assert_eq!(p.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        let ok = Dataset::join(&design, vec![series(2, 5), series(1, 5)]).unwrap();
        assert_eq!(ok.run_ids(), vec![1, 2]);
    }

    #[test]
    fn split_by_ids() {
        let design: Vec<_> = (1..=5).map(|i| (i, ics(i as f64 + 4.0))).collect();
        let d = Dataset::join(&design, (1..=5).map(|i| series(i, 6)).collect()).unwrap();
        let (keep, out) = d.split(&[2, 4]).unwrap();
        assert_eq!(keep.run_ids(), vec![1, 3, 5]);
        assert_eq!(out.run_ids(), vec![2, 4]);
        assert!(d.split(&[42]).is_err());
    }
}
