//! On-disk artifact formats. Every file carries a format version; writes go
//! through a temporary file and a rename so a failed run never leaves a
//! truncated artifact behind.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CcdfPoint, EvaluationReport, SchemePlacement};
use crate::error::{Error, Result};
use crate::evt::FitReport;
use crate::gpr::ZoneModel;
use crate::scenario::{ExperimentConfig, ZoneId};

pub const FORMAT_VERSION: u32 = 1;

/// Full-precision decimal: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path.display().to_string(), e))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub(super) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::parse(path.display().to_string(), e))
}

pub(super) fn check_version(what: &Path, found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            what: what.display().to_string(),
            found,
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Provenance line at the top of a sample CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFileHeader {
    pub format_version: u32,
    pub config_hash: String,
    pub zone: ZoneId,
    pub position: [f64; 2],
    pub seed: u64,
    pub count: usize,
}

impl SampleFileHeader {
    fn to_line(&self) -> String {
        format!(
            "# format_version={},config_hash={},zone={},x={},y={},seed={},count={}\n",
            self.format_version,
            self.config_hash,
            self.zone,
            num(self.position[0]),
            num(self.position[1]),
            self.seed,
            self.count
        )
    }

    fn parse(line: &str, path: &Path) -> Result<Self> {
        let what = || path.display().to_string();
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(what(), "missing '#' header line"))?;
        let get = |key: &str| -> Result<String> {
            body.trim()
                .split(',')
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(what(), format!("header lacks {key}")))
        };
        let bad = |k: &str| Error::parse(what(), format!("bad header value for {k}"));
        Ok(Self {
            format_version: get("format_version")?.parse().map_err(|_| bad("format_version"))?,
            config_hash: get("config_hash")?,
            zone: ZoneId(get("zone")?.parse().map_err(|_| bad("zone"))?),
            position: [
                get("x")?.parse().map_err(|_| bad("x"))?,
                get("y")?.parse().map_err(|_| bad("y"))?,
            ],
            seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
            count: get("count")?.parse().map_err(|_| bad("count"))?,
        })
    }
}

/// Sample CSV: a `#` provenance line, then `block_index,value` rows.
pub fn write_samples_csv(path: &Path, header: &SampleFileHeader, values: &[f64]) -> Result<()> {
    let mut buf = header.to_line().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| Error::parse(path.display().to_string(), e);
        w.write_record(["block_index", "value"]).map_err(err)?;
        for (i, &v) in values.iter().enumerate() {
            w.write_record([i.to_string(), num(v)]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}

pub fn read_samples_csv(path: &Path) -> Result<(SampleFileHeader, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let header = SampleFileHeader::parse(first, path)?;
    check_version(path, header.format_version)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(rest.as_bytes());
    let mut values = Vec::with_capacity(header.count);
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse(path.display().to_string(), e))?;
        let v: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path.display().to_string(), "bad value column"))?;
        values.push(v);
    }
    if values.len() != header.count {
        return Err(Error::parse(
            path.display().to_string(),
            format!("header announces {} samples, file has {}", header.count, values.len()),
        ));
    }
    Ok((header, values))
}

/// GEV fit of one (zone, training position) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub zone: ZoneId,
    pub position_index: usize,
    pub position: [f64; 2],
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FitsFile {
    format_version: u32,
    config_hash: String,
    fits: Vec<FitRecord>,
}

pub fn write_fits(path: &Path, config_hash: &str, fits: &[FitRecord]) -> Result<()> {
    write_json_atomic(
        path,
        &FitsFile {
            format_version: FORMAT_VERSION,
            config_hash: config_hash.to_string(),
            fits: fits.to_vec(),
        },
    )
}

/// Reads fits, rejecting files produced under a different configuration.
pub fn read_fits(path: &Path, config_hash: &str) -> Result<Vec<FitRecord>> {
    let f: FitsFile = read_json(path)?;
    check_version(path, f.format_version)?;
    check_hash(path, config_hash, &f.config_hash)?;
    Ok(f.fits)
}

pub(super) fn check_hash(path: &Path, expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(Error::HashMismatch {
            path: path.to_path_buf(),
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Trained regressors for all zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config_hash: String,
    /// Violation probability the zeta targets were computed for.
    pub epsilon: f64,
    pub models: Vec<ZoneModel>,
}

impl ModelBundle {
    pub fn new(config: &ExperimentConfig, models: Vec<ZoneModel>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config_hash: config.hash(),
            epsilon: config.epsilon,
            models,
        }
    }
}

pub fn write_models(path: &Path, bundle: &ModelBundle) -> Result<()> {
    write_json_atomic(path, bundle)
}

/// Reads a model bundle, rejecting one trained under a different configuration.
pub fn read_models(path: &Path, config_hash: &str) -> Result<ModelBundle> {
    let b: ModelBundle = read_json(path)?;
    check_version(path, b.format_version)?;
    check_hash(path, config_hash, &b.config_hash)?;
    Ok(b)
}

pub fn read_placement(path: &Path, config_hash: &str) -> Result<SchemePlacement> {
    let p: SchemePlacement = read_json(path)?;
    check_version(path, p.format_version)?;
    check_hash(path, config_hash, &p.config_hash)?;
    Ok(p)
}

pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    let r: EvaluationReport = read_json(path)?;
    check_version(path, r.format_version)?;
    Ok(r)
}

/// One row of the scheme comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scheme: String,
    pub q0_5: f64,
    pub q0_9: f64,
    pub q0_99: f64,
    pub q0_999: f64,
    pub mean_level: f64,
    pub violation_freq: f64,
}

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| Error::parse(path.display().to_string(), e);
        w.write_record(["scheme", "q0.5", "q0.9", "q0.99", "q0.999", "mean_level", "violation_freq"])
            .map_err(err)?;
        for r in rows {
            w.write_record([
                r.scheme.clone(),
                num(r.q0_5),
                num(r.q0_9),
                num(r.q0_99),
                num(r.q0_999),
                num(r.mean_level),
                num(r.violation_freq),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}

pub fn write_ccdf_csv(path: &Path, points: &[CcdfPoint]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| Error::parse(path.display().to_string(), e);
        w.write_record(["t", "ccdf"]).map_err(err)?;
        for p in points {
            w.write_record([num(p.t), num(p.ccdf)]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}
