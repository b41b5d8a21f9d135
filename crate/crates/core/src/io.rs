//! File formats: design and series CSV, draws JSONL, fitted-model archives,
//! bands, scores and JSON summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, FoSSeries};
use crate::error::{Error, Result};
use crate::fos_models::ModelKind;
use crate::gp_emulator::{InitialConditions, StandardizationStats};
use crate::inference::{ChainConfig, ChainStats, PosteriorDraws};
use crate::prediction::{PredictionBand, TTFDistribution};
use crate::scoring::{RunScore, ScoreTable};

pub const DESIGN_COLUMNS: [&str; 6] = [
    "run_id",
    "height_m",
    "angle_deg",
    "cohesion_kpa",
    "friction_deg",
    "permeability_m_per_s",
];
pub const SERIES_COLUMNS: [&str; 3] = ["run_id", "year", "fos"];
pub const BAND_COLUMNS: [&str; 4] = ["grid", "mean", "lo95", "hi95"];

/// Round-trip formatting with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a CSV with the exact expected header, parsing every cell as a
/// finite `f64`. All bad cells are reported.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let got: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if got != header {
        return Err(Error::Format(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            header.join(","),
            got.join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("{} row {}: {e}", path.display(), line + 1));
                continue;
            }
        };
        let mut row = Vec::with_capacity(header.len());
        for (col, cell) in header.iter().zip(rec.iter()) {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => problems.push(format!("{} row {}: bad {col} value '{cell}'", path.display(), line + 1)),
            }
        }
        rows.push(row);
    }
    if problems.is_empty() {
        Ok(rows)
    } else {
        Err(Error::DataValidation(problems))
    }
}

fn run_id_of(v: f64, path: &Path, row: usize, problems: &mut Vec<String>) -> u32 {
    if v >= 0.0 && v <= u32::MAX as f64 && v.fract() == 0.0 {
        v as u32
    } else {
        problems.push(format!("{} row {row}: run_id {v} is not a non-negative integer", path.display()));
        0
    }
}

pub fn write_design(path: &Path, design: &[(u32, InitialConditions<f64>)]) -> Result<()> {
    let rows = design.iter().map(|(id, x)| {
        vec![
            id.to_string(),
            fmt_real(x.height),
            fmt_real(x.angle),
            fmt_real(x.cohesion),
            fmt_real(x.friction_angle),
            fmt_real(x.permeability),
        ]
    });
    write_csv(path, &DESIGN_COLUMNS, rows)
}

pub fn read_design(path: &Path) -> Result<Vec<(u32, InitialConditions<f64>)>> {
    let rows = read_csv(path, &DESIGN_COLUMNS)?;
    let mut problems = Vec::new();
    let out = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let id = run_id_of(r[0], path, i + 1, &mut problems);
            (id, InitialConditions::new(r[1], r[2], r[3], r[4], r[5]))
        })
        .collect();
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::DataValidation(problems))
    }
}

pub fn write_series(path: &Path, series: &[FoSSeries]) -> Result<()> {
    let rows = series.iter().flat_map(|s| {
        s.times
            .iter()
            .zip(&s.fos)
            .map(move |(t, f)| vec![s.run_id.to_string(), fmt_real(*t), fmt_real(*f)])
    });
    write_csv(path, &SERIES_COLUMNS, rows)
}

/// Reads series grouped by run id in order of first appearance. A run is
/// censored when its last year reaches `horizon`.
pub fn read_series(path: &Path, horizon: f64) -> Result<Vec<FoSSeries>> {
    let rows = read_csv(path, &SERIES_COLUMNS)?;
    let mut problems = Vec::new();
    let mut order = Vec::new();
    let mut by_id: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let id = run_id_of(r[0], path, i + 1, &mut problems);
        let e = by_id.entry(id).or_insert_with(|| {
            order.push(id);
            (Vec::new(), Vec::new())
        });
        e.0.push(r[1]);
        e.1.push(r[2]);
    }
    if !problems.is_empty() {
        return Err(Error::DataValidation(problems));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (t, f) = by_id.remove(&id).expect("id recorded on insert");
            let censored = t.last().is_some_and(|&l| l >= horizon);
            FoSSeries::new(id, t, f, censored)
        })
        .collect())
}

/// Loads and validates a dataset, reporting every problem found.
pub fn read_dataset(design: &Path, series: &Path, horizon: f64) -> Result<Dataset> {
    let d = read_design(design)?;
    let s = read_series(series, horizon)?;
    let data = Dataset::join(&d, s)?;
    data.validate()?;
    Ok(data)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// One JSON object per post-warmup draw: chain, absolute iteration, then
/// every parameter by name.
pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let mut w = create(path)?;
    for c in 0..draws.n_chains() {
        for d in 0..draws.n_draws() {
            let mut obj = Map::new();
            obj.insert("chain".into(), Value::from(c));
            obj.insert("iteration".into(), Value::from(draws.warmup() + d));
            for (p, name) in draws.names().iter().enumerate() {
                obj.insert(name.clone(), Value::from(draws.get(c, d, p)));
            }
            serde_json::to_writer(&mut w, &obj).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_draws(path: &Path, archive: &FittedModelArchive) -> Result<PosteriorDraws> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let layout = crate::inference::ParamLayout::new(archive.model, archive.run_ids.len());
    let names = layout.names(&archive.run_ids);
    let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
    for (line_no, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Format(format!("{} line {}: {msg}", path.display(), line_no + 1));
        let obj: Map<String, Value> = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let chain = obj
            .get("chain")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing chain".into()))? as usize;
        let row = names
            .iter()
            .map(|n| obj.get(n).and_then(Value::as_f64).ok_or_else(|| bad(format!("missing {n}"))))
            .collect::<Result<Vec<f64>>>()?;
        if chain > chains.len() {
            return Err(bad(format!("chain {chain} out of order")));
        }
        if chain == chains.len() {
            chains.push(Vec::new());
        }
        chains[chain].push(row);
    }
    PosteriorDraws::new(
        archive.model,
        archive.run_ids.clone(),
        archive.nugget,
        archive.warmup,
        chains,
        archive.chain_stats.clone(),
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Everything needed to predict from a fit without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModelArchive {
    pub version: String,
    pub model: ModelKind,
    pub nugget: f64,
    pub warmup: usize,
    pub chains: ChainConfig,
    pub run_ids: Vec<u32>,
    pub stats: StandardizationStats<f64>,
    pub training: Dataset,
    pub chain_stats: Vec<ChainStats>,
    /// Draws file, relative to the archive's directory.
    pub draws_path: String,
    pub draws_sha256: String,
    /// Hash of the training data and standardisation.
    pub fingerprint: String,
}

impl FittedModelArchive {
    pub fn data_fingerprint(training: &Dataset, stats: &StandardizationStats<f64>) -> String {
        let body = serde_json::to_vec(&(training, stats)).expect("plain data serialises");
        sha256_hex(&body)
    }

    pub fn training_ics(&self) -> Vec<InitialConditions<f64>> {
        self.training.ics()
    }

    pub fn draws_file(&self, archive_path: &Path) -> PathBuf {
        archive_path.parent().unwrap_or(Path::new(".")).join(&self.draws_path)
    }

    /// Loads an archive and checks its fingerprint and draws hash.
    pub fn load(path: &Path) -> Result<(Self, PosteriorDraws)> {
        let a: Self = read_json(path)?;
        a.verify(None)?;
        let dp = a.draws_file(path);
        let h = sha256_file(&dp)?;
        if h != a.draws_sha256 {
            return Err(Error::Format(format!("{}: draws file does not match the archive hash", dp.display())));
        }
        let d = read_draws(&dp, &a)?;
        Ok((a, d))
    }

    /// Fails when the stored fingerprint disagrees with the stored data, or
    /// with `stats` when supplied.
    pub fn verify(&self, stats: Option<&StandardizationStats<f64>>) -> Result<()> {
        let mut problems = Vec::new();
        if Self::data_fingerprint(&self.training, &self.stats) != self.fingerprint {
            problems.push("archive fingerprint does not match its training data".to_string());
        }
        if let Some(s) = stats {
            if Self::data_fingerprint(&self.training, s) != self.fingerprint {
                problems.push("supplied standardisation does not match the archive fingerprint".to_string());
            }
        }
        if self.training.run_ids() != self.run_ids {
            problems.push("archive run ids disagree with its training data".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::DataValidation(problems))
        }
    }
}

pub fn write_band(path: &Path, band: &PredictionBand) -> Result<()> {
    let rows = (0..band.len()).map(|j| {
        vec![
            fmt_real(band.grid[j]),
            fmt_real(band.mean[j]),
            fmt_real(band.lo95[j]),
            fmt_real(band.hi95[j]),
        ]
    });
    write_csv(path, &BAND_COLUMNS, rows)
}

pub fn read_band(path: &Path) -> Result<PredictionBand> {
    let rows = read_csv(path, &BAND_COLUMNS)?;
    Ok(PredictionBand {
        grid: rows.iter().map(|r| r[0]).collect(),
        mean: rows.iter().map(|r| r[1]).collect(),
        lo95: rows.iter().map(|r| r[2]).collect(),
        hi95: rows.iter().map(|r| r[3]).collect(),
        curves: None,
    })
}

/// Per-draw curves in long form: draw, grid, fos.
pub fn write_curves(path: &Path, band: &PredictionBand) -> Result<()> {
    let Some(curves) = &band.curves else {
        return Err(Error::invalid("band has no per-draw curves"));
    };
    let rows = curves.iter().enumerate().flat_map(|(s, c)| {
        band.grid
            .iter()
            .zip(c)
            .map(move |(t, f)| vec![s.to_string(), fmt_real(*t), fmt_real(*f)])
    });
    write_csv(path, &["draw", "grid", "fos"], rows)
}

#[derive(Serialize)]
struct TtfFile<'a> {
    summary: crate::prediction::TtfSummary,
    rho: &'a [f64],
    omega: &'a [f64],
}

pub fn write_ttf(path: &Path, ttf: &TTFDistribution) -> Result<()> {
    write_json(
        path,
        &TtfFile {
            summary: ttf.summary(),
            rho: &ttf.rho,
            omega: &ttf.omega,
        },
    )
}

pub fn write_ttf_csv(path: &Path, ttf: &TTFDistribution) -> Result<()> {
    let rows = ttf
        .rho
        .iter()
        .zip(&ttf.omega)
        .enumerate()
        .map(|(s, (r, w))| vec![s.to_string(), fmt_real(*r), fmt_real(*w)]);
    write_csv(path, &["draw", "rho", "omega"], rows)
}

pub const SCORE_COLUMNS: [&str; 4] = ["run_id", "time", "se", "crps"];

pub fn write_scores(path: &Path, scores: &[RunScore]) -> Result<()> {
    let rows = scores.iter().flat_map(|s| {
        (0..s.times.len()).map(move |j| {
            vec![
                s.run_id.to_string(),
                fmt_real(s.times[j]),
                fmt_real(s.se[j]),
                fmt_real(s.crps[j]),
            ]
        })
    });
    write_csv(path, &SCORE_COLUMNS, rows)
}

pub fn read_scores(path: &Path) -> Result<Vec<RunScore>> {
    let rows = read_csv(path, &SCORE_COLUMNS)?;
    let mut problems = Vec::new();
    let mut out: Vec<RunScore> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let id = run_id_of(r[0], path, i + 1, &mut problems);
        if out.last().is_none_or(|s| s.run_id != id) {
            out.push(RunScore {
                run_id: id,
                times: Vec::new(),
                se: Vec::new(),
                crps: Vec::new(),
            });
        }
        let s = out.last_mut().expect("pushed above");
        s.times.push(r[1]);
        s.se.push(r[2]);
        s.crps.push(r[3]);
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::DataValidation(problems))
    }
}

pub fn write_score_table(path: &Path, table: &ScoreTable) -> Result<()> {
    let rows = table.rows.iter().map(|r| {
        vec![
            r.run_id.to_string(),
            fmt_real(r.time),
            fmt_real(r.mse_q),
            fmt_real(r.mse_bs),
            fmt_real(r.crps_q),
            fmt_real(r.crps_bs),
            fmt_real(r.d_mse()),
            fmt_real(r.d_crps()),
        ]
    });
    write_csv(
        path,
        &["run_id", "time", "mse_q", "mse_bs", "crps_q", "crps_bs", "d_mse", "d_crps"],
        rows,
    )
}
