//! End-to-end pipeline: offline collection of block maxima, GEV fitting and
//! regression, online placement with baselines, and Monte-Carlo evaluation.
//!
//! Every random draw comes from a keyed stream (see [`crate::rng`]), so each
//! stage is a pure function of its inputs, the configuration and the seed,
//! regardless of how rayon schedules the work.

mod io;

pub use io::{
    read_fits, read_models, read_placement, read_report, read_samples_csv, write_ccdf_csv,
    write_comparison_csv, write_fits, write_json_atomic, write_models, write_samples_csv,
    ComparisonRow, FitRecord, ModelBundle, SampleFileHeader, FORMAT_VERSION,
};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_fading, squared_distance, DelaySample, LinkBudget};
use crate::error::{Error, Result};
use crate::evt::{fit_gev, FitOptions};
use crate::gpr::{build_zone_models, PositionFit, ZoneModel};
use crate::placement::{solution_at, solve_placement, vue_contexts, PlacementSolution, VueContext};
use crate::rng::{derive_seed, stream, Purpose, StreamRng};
use crate::scenario::{
    spawn_in_zone, spawn_vehicles, step_mobility, training_grid, Distribution, ExperimentConfig,
    VehicleState, ZoneId,
};

/// Quantile levels reported for every scheme.
pub const REPORT_QUANTILES: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

/// Largest number of CCDF points kept in a report.
const CCDF_POINTS: usize = 1024;

/// Block redraws allowed before a zero-gain streak is treated as an error.
const MAX_BLOCK_REDRAWS: usize = 1000;

/// Maximum over `slots` slots of the delay of one vehicle, which keeps moving.
///
/// `delay` maps a channel gain to seconds. Returns `None` if a slot had zero
/// gain (infinite delay).
fn block_maximum(
    start: VehicleState,
    uav: [f64; 3],
    slots: usize,
    config: &ExperimentConfig,
    delay: impl Fn(f64) -> f64,
    rng: &mut StreamRng,
) -> Option<f64> {
    let spec = &config.channel;
    let scale = spec.phi / (spec.theta * spec.theta);
    let mut v = start;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..slots {
        let fading = draw_fading(spec, rng);
        let h = scale * fading / squared_distance(uav, v.position);
        let t = delay(h);
        if !t.is_finite() {
            return None;
        }
        worst = worst.max(t);
        if s + 1 < slots {
            v = step_mobility(&v, &config.area, &config.mobility, rng);
        }
    }
    Some(worst)
}

fn position_key(p: [f64; 2]) -> [u64; 2] {
    [p[0].to_bits(), p[1].to_bits()]
}

/// Collects `n_blocks` block maxima of the normalized delay for vehicles in
/// `zone` with the UAV hovering at `uav_position`.
///
/// Each block spawns a fresh tracked vehicle uniformly on the zone's roads,
/// then records the largest normalized delay over `S0` slots while the vehicle
/// moves (it stays attributed to the zone it started in). Block `b` uses its
/// own stream keyed by `(seed, zone, position, b)`. A block containing a
/// zero-gain slot is redrawn with a warning rather than stored as infinite.
pub fn collect_block_maxima(
    config: &ExperimentConfig,
    zone: ZoneId,
    uav_position: [f64; 2],
    n_blocks: usize,
    seed: u64,
) -> Result<Vec<DelaySample>> {
    config.validate()?;
    if zone.index() == 0 || zone.index() > config.area.zone_count() {
        return Err(Error::Config(format!("zone {zone} does not exist")));
    }
    if n_blocks == 0 {
        return Err(Error::Empty("block count"));
    }
    let link = LinkBudget::from_config(config);
    let a1 = config.base_image_bits();
    let uav = [uav_position[0], uav_position[1], config.area.uav_altitude];
    let [kx, ky] = position_key(uav_position);
    (0..n_blocks as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, Purpose::Collect, &[zone.index() as u64, kx, ky, b]);
            for _ in 0..MAX_BLOCK_REDRAWS {
                let v = spawn_in_zone(&config.area, &config.mobility, config.slot_length, zone, &mut rng)?;
                match block_maximum(v, uav, config.slots_per_block, config, |h| link.delay(a1, h), &mut rng) {
                    Some(value) => {
                        return Ok(DelaySample {
                            value,
                            zone,
                            uav_position,
                            block_index: b,
                        })
                    }
                    None => log::warn!("zone {zone} block {b}: zero channel gain, block redrawn"),
                }
            }
            Err(Error::Domain(format!("zone {zone} block {b}: channel gain stuck at zero")))
        })
        .collect()
}

/// One (zone, training position) entry of the collection manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub zone: ZoneId,
    pub position_index: usize,
    pub position: [f64; 2],
    pub samples: usize,
    /// Relative to the output directory; empty for in-memory runs.
    pub csv_path: String,
    /// Seed actually used for this entry's streams (derived, for provenance).
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionManifest {
    pub format_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub samples_per_position: usize,
    pub entries: Vec<ManifestEntry>,
}

impl CollectionManifest {
    /// Checks that every (zone, position) pair is present with at least
    /// `samples_per_position` samples and carries the expected hash.
    pub fn check_complete(&self, config: &ExperimentConfig, zones: &[ZoneId]) -> Result<()> {
        let hash = config.hash();
        if self.config_hash != hash {
            return Err(Error::HashMismatch {
                path: PathBuf::from("manifest.json"),
                expected: hash,
                found: self.config_hash.clone(),
            });
        }
        let grid = training_grid(&config.area, config.training_positions)?;
        let mut gaps = Vec::new();
        for &z in zones {
            for (k, p) in grid.iter().enumerate() {
                let ok = self.entries.iter().any(|e| {
                    e.zone == z && e.position_index == k && e.position == *p && e.samples >= config.samples_per_position
                });
                if !ok {
                    gaps.push(format!("zone {z} at ({}, {})", p[0], p[1]));
                }
            }
        }
        if gaps.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteDataset(gaps.join(", ")))
        }
    }
}

/// Where the offline pipeline keeps its artifacts, and which zones it covers.
#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Output directory; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Zones to process; `None` means all.
    pub zones: Option<Vec<ZoneId>>,
}

impl PipelineOptions {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: Some(dir.into()),
            zones: None,
        }
    }

    fn zones(&self, config: &ExperimentConfig) -> Result<Vec<ZoneId>> {
        match &self.zones {
            None => Ok(config.area.zones().collect()),
            Some(zs) => {
                if zs.is_empty() {
                    return Err(Error::Empty("zone list"));
                }
                if let Some(z) = zs.iter().find(|z| z.index() == 0 || z.index() > config.area.zone_count()) {
                    return Err(Error::Config(format!("zone {z} does not exist")));
                }
                Ok(zs.clone())
            }
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FITS_FILE: &str = "fits.json";
pub const MODELS_FILE: &str = "models.json";

pub fn sample_file_name(zone: ZoneId, position_index: usize) -> String {
    format!("samples/zone{}_pos{:03}.csv", zone.index(), position_index)
}

/// Result of the offline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineOutput {
    pub manifest: CollectionManifest,
    pub fits: Vec<FitRecord>,
    pub models: Vec<ZoneModel>,
}

/// Collects block maxima for every (zone, training position), writing one CSV
/// per pair when an output directory is given.
///
/// With an output directory the stage resumes: a sample file whose header
/// matches the config hash and holds at least N samples is reused as is. A
/// file written under a different config aborts with a hash mismatch.
pub fn collect_all(config: &ExperimentConfig, opts: &PipelineOptions) -> Result<(CollectionManifest, Vec<Vec<f64>>)> {
    config.validate()?;
    let zones = opts.zones(config)?;
    let grid = training_grid(&config.area, config.training_positions)?;
    let hash = config.hash();
    let pairs: Vec<(ZoneId, usize, [f64; 2])> = zones
        .iter()
        .flat_map(|&z| grid.iter().enumerate().map(move |(k, &p)| (z, k, p)))
        .collect();
    let n = config.samples_per_position;
    let mut entries = Vec::with_capacity(pairs.len());
    let mut values = Vec::with_capacity(pairs.len());
    for &(zone, k, p) in &pairs {
        let [kx, ky] = position_key(p);
        let entry_seed = derive_seed(config.master_seed, Purpose::Collect, &[zone.index() as u64, kx, ky]);
        let rel = match &opts.out_dir {
            Some(_) => sample_file_name(zone, k),
            None => String::new(),
        };
        let reused = match &opts.out_dir {
            Some(dir) => try_reuse_samples(&dir.join(&rel), &hash, zone, p, n)?,
            None => None,
        };
        let v = match reused {
            Some(v) => {
                log::info!("zone {zone} position {k}: reusing {} samples", v.len());
                v
            }
            None => {
                let samples = collect_block_maxima(config, zone, p, n, config.master_seed)?;
                let v: Vec<f64> = samples.iter().map(|s| s.value).collect();
                if let Some(dir) = &opts.out_dir {
                    let header = SampleFileHeader {
                        format_version: FORMAT_VERSION,
                        config_hash: hash.clone(),
                        zone,
                        position: p,
                        seed: entry_seed,
                        count: v.len(),
                    };
                    write_samples_csv(&dir.join(&rel), &header, &v)?;
                }
                log::info!("zone {zone} position {k}: collected {} samples", v.len());
                v
            }
        };
        entries.push(ManifestEntry {
            zone,
            position_index: k,
            position: p,
            samples: v.len(),
            csv_path: rel,
            seed: entry_seed,
            config_hash: hash.clone(),
        });
        values.push(v);
    }
    let manifest = CollectionManifest {
        format_version: FORMAT_VERSION,
        config_hash: hash,
        master_seed: config.master_seed,
        samples_per_position: n,
        entries,
    };
    if let Some(dir) = &opts.out_dir {
        write_json_atomic(&dir.join(MANIFEST_FILE), &manifest)?;
    }
    Ok((manifest, values))
}

fn try_reuse_samples(path: &Path, hash: &str, zone: ZoneId, p: [f64; 2], n: usize) -> Result<Option<Vec<f64>>> {
    if !path.exists() {
        return Ok(None);
    }
    let (header, values) = match read_samples_csv(path) {
        Ok(x) => x,
        Err(e) => {
            log::warn!("{}: unreadable sample file ({e}), recollecting", path.display());
            return Ok(None);
        }
    };
    if header.config_hash != hash {
        return Err(Error::HashMismatch {
            path: path.to_path_buf(),
            expected: hash.to_string(),
            found: header.config_hash,
        });
    }
    if header.zone != zone || header.position != p || values.len() < n {
        return Ok(None);
    }
    Ok(Some(values))
}

/// Loads a collection written by [`collect_all`] into `dir`, checking the
/// manifest and every sample file against `config_hash`.
pub fn read_collection(dir: &Path, config_hash: &str) -> Result<(CollectionManifest, Vec<Vec<f64>>)> {
    let path = dir.join(MANIFEST_FILE);
    let manifest: CollectionManifest = io::read_json(&path)?;
    io::check_version(&path, manifest.format_version)?;
    io::check_hash(&path, config_hash, &manifest.config_hash)?;
    let mut values = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let p = dir.join(&e.csv_path);
        let (header, v) = read_samples_csv(&p)?;
        io::check_hash(&p, config_hash, &header.config_hash)?;
        if v.len() != e.samples {
            return Err(Error::IncompleteDataset(format!(
                "{}: manifest lists {} samples, file has {}",
                p.display(),
                e.samples,
                v.len()
            )));
        }
        values.push(v);
    }
    Ok((manifest, values))
}

/// Fits a GEV law to each manifest entry's samples.
pub fn fit_all(config: &ExperimentConfig, manifest: &CollectionManifest, samples: &[Vec<f64>]) -> Result<Vec<FitRecord>> {
    if manifest.entries.len() != samples.len() {
        return Err(Error::Domain("manifest and sample sets differ in length".into()));
    }
    let opts = FitOptions::with_learning_rate(config.gev_learning_rate);
    manifest
        .entries
        .par_iter()
        .zip(samples.par_iter())
        .map(|(e, v)| {
            let report = fit_gev(v, &opts)?;
            if !report.converged {
                log::warn!(
                    "zone {} position {}: GEV fit stopped with gradient norm {:.3e}",
                    e.zone,
                    e.position_index,
                    report.gradient_norm
                );
            }
            Ok(FitRecord {
                zone: e.zone,
                position_index: e.position_index,
                position: e.position,
                report,
            })
        })
        .collect()
}

/// Trains the per-zone regressors from completed fits.
pub fn train_models(config: &ExperimentConfig, fits: &[FitRecord], zones: &[ZoneId]) -> Result<Vec<ZoneModel>> {
    let grid = training_grid(&config.area, config.training_positions)?;
    let pf: Vec<PositionFit> = fits
        .iter()
        .map(|f| PositionFit {
            zone: f.zone,
            position: f.position,
            params: f.report.params,
        })
        .collect();
    // Each zone trains independently; collect keeps the zone order.
    zones
        .par_iter()
        .map(|&z| {
            build_zone_models(&pf, &[z], &grid, config.epsilon, config.gpr_restarts).map(|mut m| m.remove(0))
        })
        .collect()
}

/// Collect, fit and regress for every zone and training position.
///
/// Re-running with the same configuration reproduces byte-identical
/// artifacts. With an output directory, previously collected sample files are
/// reused (see [`collect_all`]) and the fits and models are written next to
/// them.
pub fn run_offline_pipeline(config: &ExperimentConfig, opts: &PipelineOptions) -> Result<OfflineOutput> {
    let zones = opts.zones(config)?;
    let (manifest, samples) = collect_all(config, opts)?;
    manifest.check_complete(config, &zones)?;
    let fits = fit_all(config, &manifest, &samples)?;
    if let Some(dir) = &opts.out_dir {
        write_fits(&dir.join(FITS_FILE), &config.hash(), &fits)?;
    }
    let models = train_models(config, &fits, &zones)?;
    if let Some(dir) = &opts.out_dir {
        write_models(&dir.join(MODELS_FILE), &ModelBundle::new(config, models.clone()))?;
    }
    Ok(OfflineOutput { manifest, fits, models })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Learned placement and per-vehicle resolutions.
    Proposed,
    /// UAV stays at the area center.
    Fixed,
    /// UAV at a uniformly random point of the area.
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Fixed, Scheme::Random];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Fixed => "fixed",
            Scheme::Random => "random",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "fixed" => Ok(Scheme::Fixed),
            "random" => Ok(Scheme::Random),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Vehicle positions at optimization time, drawn from the snapshot stream.
pub fn vue_snapshot(config: &ExperimentConfig, distribution: &Distribution, seed: u64) -> Result<Vec<VehicleState>> {
    let mut rng = stream(seed, Purpose::Spawn, &[]);
    spawn_vehicles(config, distribution, &mut rng)
}

/// A placement with the scheme that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemePlacement {
    pub format_version: u32,
    pub scheme: Scheme,
    pub config_hash: String,
    pub seed: u64,
    pub solution: PlacementSolution,
}

/// Places the UAV with `scheme` and assigns resolution levels.
///
/// Baselines use the rounded mean level of the proposed solution for every
/// vehicle, so the proposed placement is always computed first.
pub fn place_and_select(
    models: &[ZoneModel],
    vues: &[VueContext],
    config: &ExperimentConfig,
    scheme: Scheme,
    seed: u64,
) -> Result<SchemePlacement> {
    let proposed = solve_placement(models, vues, config)?;
    let solution = match scheme {
        Scheme::Proposed => proposed,
        Scheme::Fixed | Scheme::Random => {
            let e = if scheme == Scheme::Fixed {
                [0.0, 0.0]
            } else {
                let hw = config.area.half_width;
                let mut rng = stream(seed, Purpose::Placement, &[]);
                [rng.random_range(-hw..=hw), rng.random_range(-hw..=hw)]
            };
            let level = mean_level(&proposed.levels).round() as usize;
            let level = level.clamp(1, config.resolutions.len());
            let mut s = solution_at(models, vues, e, config)?;
            s.levels = vec![level; vues.len()];
            s
        }
    };
    Ok(SchemePlacement {
        format_version: FORMAT_VERSION,
        scheme,
        config_hash: config.hash(),
        seed,
        solution,
    })
}

/// Convenience wrapper: snapshot vehicles, then place.
pub fn place_scheme(
    models: &[ZoneModel],
    config: &ExperimentConfig,
    distribution: &Distribution,
    scheme: Scheme,
    seed: u64,
) -> Result<SchemePlacement> {
    let vehicles = vue_snapshot(config, distribution, seed)?;
    let vues = vue_contexts(&vehicles, config)?;
    place_and_select(models, &vues, config, scheme, seed)
}

fn mean_level(levels: &[usize]) -> f64 {
    if levels.is_empty() {
        return 0.0;
    }
    levels.iter().sum::<usize>() as f64 / levels.len() as f64
}

/// Per-block, per-vehicle maxima of the actual delay `A_l V / rate`.
///
/// Block `b` respawns vehicle `i` uniformly in the zone it occupied at
/// optimization time and runs `S0` slots with fresh fading and mobility.
/// Streams are keyed by `(seed, b, i)` only, so different schemes evaluated
/// with the same seed see identical vehicle paths and fading.
/// The result is block-major: entry `b * V + i`.
pub fn simulate_maxima(solution: &PlacementSolution, config: &ExperimentConfig, n_blocks: usize, seed: u64) -> Result<Vec<f64>> {
    config.validate()?;
    let nv = solution.levels.len();
    if nv == 0 || solution.vue_zones.len() != nv {
        return Err(Error::Domain("solution must carry a zone and a level for every vehicle".into()));
    }
    if nv != config.num_vues {
        return Err(Error::Domain(format!(
            "solution has {nv} vehicles, configuration has {}",
            config.num_vues
        )));
    }
    if n_blocks == 0 {
        return Err(Error::Empty("block count"));
    }
    let bits: Vec<f64> = solution
        .levels
        .iter()
        .map(|&l| {
            config
                .resolutions
                .get(l.wrapping_sub(1))
                .map(|r| r.bits * nv as f64)
                .ok_or_else(|| Error::Domain(format!("resolution level {l} does not exist")))
        })
        .collect::<Result<_>>()?;
    let link = LinkBudget::from_config(config);
    let uav = [solution.e_u[0], solution.e_u[1], config.area.uav_altitude];
    let per_block: Vec<Vec<f64>> = (0..n_blocks as u64)
        .into_par_iter()
        .map(|b| {
            (0..nv)
                .map(|i| {
                    let zone = solution.vue_zones[i];
                    let mut rng = stream(seed, Purpose::Evaluate, &[b, i as u64]);
                    for _ in 0..MAX_BLOCK_REDRAWS {
                        let v = spawn_in_zone(&config.area, &config.mobility, config.slot_length, zone, &mut rng)?;
                        let a = bits[i];
                        if let Some(t) = block_maximum(v, uav, config.slots_per_block, config, |h| link.delay(a, h), &mut rng) {
                            return Ok(t);
                        }
                        log::warn!("evaluation block {b} vehicle {i}: zero channel gain, block redrawn");
                    }
                    Err(Error::Domain(format!("evaluation block {b} vehicle {i}: channel gain stuck at zero")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_block.into_iter().flatten().collect())
}

/// The `ceil(q n)`-th smallest sample.
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let mut v = samples.to_vec();
    let k = quantile_rank(v.len(), q);
    let (_, x, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*x)
}

/// 1-based rank `ceil(q n)`; products within rounding of an integer count as
/// that integer.
fn quantile_rank(n: usize, q: f64) -> usize {
    let x = q * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 4.0 * f64::EPSILON * x.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Fraction of samples strictly above `t`.
pub fn empirical_ccdf(samples: &[f64], t: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|&&x| x > t).count() as f64 / samples.len() as f64
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and a
/// continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    /// Seconds.
    pub t: f64,
    pub ccdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub q: f64,
    /// Seconds.
    pub t: f64,
}

/// Monte-Carlo performance of one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub scheme: Scheme,
    pub config_hash: String,
    pub seed: u64,
    pub blocks: usize,
    pub position: [f64; 2],
    pub mean_level: f64,
    /// Pooled over all blocks and vehicles.
    pub samples: usize,
    pub quantiles: Vec<QuantilePoint>,
    /// Starts at t = 0 and ends beyond the largest sample.
    pub ccdf: Vec<CcdfPoint>,
    /// Pooled frequency of T_max > T_th.
    pub violation_freq: f64,
    /// Frequency of T_max > T_th per vehicle.
    pub per_vue_violation: Vec<f64>,
    pub max_delay: f64,
}

impl EvaluationReport {
    /// Summarizes block-major maxima (`b * V + i`).
    pub fn from_maxima(
        maxima: &[f64],
        placement: &SchemePlacement,
        config: &ExperimentConfig,
        blocks: usize,
        seed: u64,
    ) -> Result<Self> {
        let nv = placement.solution.levels.len();
        if maxima.is_empty() || nv == 0 || maxima.len() != blocks * nv {
            return Err(Error::Domain("maxima do not match blocks x vehicles".into()));
        }
        let mut sorted = maxima.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let quantiles = REPORT_QUANTILES
            .iter()
            .map(|&q| QuantilePoint { q, t: sorted[quantile_rank(n, q) - 1] })
            .collect();
        let th = config.delay_threshold;
        let mut per_vue = vec![0usize; nv];
        for (k, &t) in maxima.iter().enumerate() {
            if t > th {
                per_vue[k % nv] += 1;
            }
        }
        let total: usize = per_vue.iter().sum();
        Ok(Self {
            format_version: FORMAT_VERSION,
            scheme: placement.scheme,
            config_hash: config.hash(),
            seed,
            blocks,
            position: placement.solution.e_u,
            mean_level: mean_level(&placement.solution.levels),
            samples: n,
            quantiles,
            ccdf: ccdf_points(&sorted),
            violation_freq: total as f64 / n as f64,
            per_vue_violation: per_vue.iter().map(|&c| c as f64 / blocks as f64).collect(),
            max_delay: sorted[n - 1],
        })
    }

    pub fn quantile(&self, q: f64) -> Option<f64> {
        self.quantiles.iter().find(|p| p.q == q).map(|p| p.t)
    }
}

/// CCDF evaluated at t = 0, at up to `CCDF_POINTS` order statistics, and just
/// past the maximum.
fn ccdf_points(sorted: &[f64]) -> Vec<CcdfPoint> {
    let n = sorted.len();
    let mut out = vec![CcdfPoint { t: 0.0, ccdf: 1.0 }];
    let m = CCDF_POINTS.min(n);
    let mut last = None;
    for j in 0..m {
        let idx = if m == 1 { n - 1 } else { j * (n - 1) / (m - 1) };
        let t = sorted[idx];
        if last == Some(t) {
            continue;
        }
        last = Some(t);
        // Count of samples strictly above t.
        let above = n - sorted.partition_point(|&x| x <= t);
        out.push(CcdfPoint { t, ccdf: above as f64 / n as f64 });
    }
    let max = sorted[n - 1];
    out.push(CcdfPoint {
        t: max + max.abs().max(f64::MIN_POSITIVE) * 1e-9,
        ccdf: 0.0,
    });
    out
}

/// Simulates `n_blocks` evaluation blocks for a placement and summarizes them.
pub fn evaluate_scheme(placement: &SchemePlacement, config: &ExperimentConfig, n_blocks: usize, seed: u64) -> Result<EvaluationReport> {
    let maxima = simulate_maxima(&placement.solution, config, n_blocks, seed)?;
    EvaluationReport::from_maxima(&maxima, placement, config, n_blocks, seed)
}

/// Comparison table rows in scheme order.
pub fn comparison_rows(reports: &[EvaluationReport]) -> Vec<ComparisonRow> {
    reports
        .iter()
        .map(|r| ComparisonRow {
            scheme: r.scheme.name().to_string(),
            q0_5: r.quantile(0.5).unwrap_or(f64::NAN),
            q0_9: r.quantile(0.9).unwrap_or(f64::NAN),
            q0_99: r.quantile(0.99).unwrap_or(f64::NAN),
            q0_999: r.quantile(0.999).unwrap_or(f64::NAN),
            mean_level: r.mean_level,
            violation_freq: r.violation_freq,
        })
        .collect()
}

/// Writes `comparison.csv` and one `ccdf_<scheme>.csv` per report into `dir`.
pub fn write_report(dir: &Path, reports: &[EvaluationReport]) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::Empty("evaluation report list"));
    }
    let mut written = Vec::new();
    let cmp = dir.join("comparison.csv");
    write_comparison_csv(&cmp, &comparison_rows(reports))?;
    written.push(cmp);
    for r in reports {
        let p = dir.join(format!("ccdf_{}.csv", r.scheme));
        write_ccdf_csv(&p, &r.ccdf)?;
        written.push(p);
    }
    Ok(written)
}
