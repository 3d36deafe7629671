//! Experiment configuration and its on-disk TOML schema.
//!
//! The file uses engineering units (dBm, dB); everything is converted to SI
//! linear units once, in [`ConfigFile::into_config`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AreaSpec, MobilitySpec};
use crate::channel::ChannelSpec;
use crate::error::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub label: String,
    /// Image size A_l, bits.
    pub bits: f64,
}

impl Resolution {
    pub fn new(label: &str, bits: f64) -> Self {
        Self {
            label: label.to_string(),
            bits,
        }
    }
}

/// How vehicles are spread over the road network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform over total road length.
    Even,
    /// Zone drawn with the given weights, then uniform on that zone's roads.
    Biased(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub area: AreaSpec,
    pub channel: ChannelSpec,
    pub mobility: MobilitySpec,
    /// V
    pub num_vues: usize,
    /// S0
    pub slots_per_block: usize,
    /// Seconds.
    pub slot_length: f64,
    /// P, watts.
    pub tx_power: f64,
    /// W, hertz.
    pub bandwidth: f64,
    /// N0, watts per hertz.
    pub noise_psd: f64,
    /// T_th, seconds.
    pub delay_threshold: f64,
    pub epsilon: f64,
    /// d_th, meters.
    pub max_displacement: f64,
    /// N, block maxima per (zone, training position).
    pub samples_per_position: usize,
    /// nu
    pub gev_learning_rate: f64,
    /// delta
    pub placement_step: f64,
    /// K, a perfect square (training positions form a regular grid).
    pub training_positions: usize,
    pub gpr_restarts: usize,
    /// Strictly increasing in `bits`.
    pub resolutions: Vec<Resolution>,
    /// (x0, y0)
    pub origin: [f64; 2],
    pub biased_zone_weights: Vec<f64>,
    pub evaluation_blocks: usize,
    pub master_seed: u64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn default_resolutions() -> Vec<Resolution> {
    vec![
        Resolution::new("240p", 2.5e6),
        Resolution::new("360p", 5.5e6),
        Resolution::new("480p", 9.8e6),
        Resolution::new("720p", 22e6),
    ]
}

impl Default for ExperimentConfig {
    /// Full-scale parameters of the reference study.
    fn default() -> Self {
        Self {
            area: AreaSpec::default(),
            channel: ChannelSpec::default(),
            mobility: MobilitySpec::default(),
            num_vues: 200,
            slots_per_block: 150,
            slot_length: 0.033,
            tx_power: dbm_to_watts(30.0),
            bandwidth: 50e6,
            noise_psd: dbm_to_watts(-174.0),
            delay_threshold: 3.0,
            epsilon: 1e-3,
            max_displacement: 20.0,
            samples_per_position: 30_000,
            gev_learning_rate: 5e-4,
            placement_step: 5e-6,
            training_positions: 81,
            gpr_restarts: 8,
            resolutions: default_resolutions(),
            origin: [0.0, 0.0],
            biased_zone_weights: vec![0.4, 0.05, 0.05, 0.05, 0.05, 0.4],
            evaluation_blocks: 20_000,
            master_seed: 2024,
        }
    }
}

impl ExperimentConfig {
    /// Reduced preset that runs end to end in minutes on a laptop: fewer
    /// samples, training positions, vehicles and evaluation blocks, everything
    /// else at full scale.
    pub fn desk() -> Self {
        Self {
            num_vues: 50,
            samples_per_position: 3_000,
            training_positions: 25,
            evaluation_blocks: 2_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.area.validate()?;
        self.channel.validate()?;
        self.mobility.validate()?;
        let positive = [
            ("slot_length", self.slot_length),
            ("tx_power", self.tx_power),
            ("bandwidth", self.bandwidth),
            ("noise_psd", self.noise_psd),
            ("delay_threshold", self.delay_threshold),
            ("gev_learning_rate", self.gev_learning_rate),
            ("placement_step", self.placement_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.max_displacement >= 0.0 && self.max_displacement.is_finite()) {
            return Err(Error::Config("max_displacement must be nonnegative".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.num_vues == 0 {
            return Err(Error::Config("num_vues must be at least 1".into()));
        }
        if self.slots_per_block == 0 {
            return Err(Error::Config("slots_per_block must be at least 1".into()));
        }
        if self.resolutions.is_empty() {
            return Err(Error::Config("at least one resolution is required".into()));
        }
        if self.resolutions.iter().any(|r| !(r.bits > 0.0))
            || self.resolutions.windows(2).any(|w| w[0].bits >= w[1].bits)
        {
            return Err(Error::Config("resolutions must be positive and strictly increasing in size".into()));
        }
        super::training_grid(&self.area, self.training_positions)?;
        if self.biased_zone_weights.len() != self.area.zone_count() {
            return Err(Error::Config(format!(
                "biased_zone_weights has {} entries for {} zones",
                self.biased_zone_weights.len(),
                self.area.zone_count()
            )));
        }
        if !self.area.contains(self.origin) {
            return Err(Error::Config("origin must lie inside the area".into()));
        }
        Ok(())
    }

    /// A_1, the smallest image size.
    pub fn base_image_bits(&self) -> f64 {
        self.resolutions[0].bits
    }

    /// a_i = A_1 * T_th / V.
    pub fn payload_coefficient(&self) -> f64 {
        self.base_image_bits() * self.delay_threshold / self.num_vues as f64
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config is always serializable");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(s).map_err(|e| Error::parse("config file", e))?;
        file.into_config()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&ConfigFile::from_config(self)).expect("config file is always serializable")
    }
}

/// On-disk layout. Every section is optional except `schema_version`; omitted
/// keys take the full-scale defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub resolutions: Option<Vec<Resolution>>,
    #[serde(default)]
    pub area: AreaSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub mobility: Option<MobilitySpec>,
    #[serde(default)]
    pub learning: LearningSection,
    #[serde(default)]
    pub placement: PlacementSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub num_vues: Option<usize>,
    pub slots_per_block: Option<usize>,
    pub slot_length_s: Option<f64>,
    pub tx_power_dbm: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub noise_psd_dbm_per_hz: Option<f64>,
    pub delay_threshold_s: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSection {
    pub half_width_m: Option<f64>,
    pub road_offsets_x_m: Option<Vec<f64>>,
    pub road_offsets_y_m: Option<Vec<f64>>,
    pub zone_splits_x_m: Option<Vec<f64>>,
    pub zone_splits_y_m: Option<Vec<f64>>,
    pub uav_altitude_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub phi: Option<f64>,
    pub theta_rad: Option<f64>,
    pub rician_factor_db: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSection {
    pub samples_per_position: Option<usize>,
    pub gev_learning_rate: Option<f64>,
    pub training_positions: Option<usize>,
    pub gpr_restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    pub origin_m: Option<[f64; 2]>,
    pub max_displacement_m: Option<f64>,
    pub step_size: Option<f64>,
    pub biased_zone_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub blocks: Option<usize>,
}

impl ConfigFile {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::FormatVersion {
                what: "config file".into(),
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        let mut c = ExperimentConfig::default();
        if let Some(s) = self.master_seed {
            c.master_seed = s;
        }
        let n = self.network;
        c.num_vues = n.num_vues.unwrap_or(c.num_vues);
        c.slots_per_block = n.slots_per_block.unwrap_or(c.slots_per_block);
        c.slot_length = n.slot_length_s.unwrap_or(c.slot_length);
        if let Some(p) = n.tx_power_dbm {
            c.tx_power = dbm_to_watts(p);
        }
        c.bandwidth = n.bandwidth_hz.unwrap_or(c.bandwidth);
        if let Some(n0) = n.noise_psd_dbm_per_hz {
            c.noise_psd = dbm_to_watts(n0);
        }
        c.delay_threshold = n.delay_threshold_s.unwrap_or(c.delay_threshold);
        c.epsilon = n.epsilon.unwrap_or(c.epsilon);
        if let Some(r) = self.resolutions {
            c.resolutions = r;
        }
        let a = self.area;
        c.area.half_width = a.half_width_m.unwrap_or(c.area.half_width);
        if let Some(v) = a.road_offsets_x_m {
            c.area.road_offsets_x = v;
        }
        if let Some(v) = a.road_offsets_y_m {
            c.area.road_offsets_y = v;
        }
        if let Some(v) = a.zone_splits_x_m {
            c.area.zone_splits_x = v;
        }
        if let Some(v) = a.zone_splits_y_m {
            c.area.zone_splits_y = v;
        }
        c.area.uav_altitude = a.uav_altitude_m.unwrap_or(c.area.uav_altitude);
        let ch = self.channel;
        c.channel.phi = ch.phi.unwrap_or(c.channel.phi);
        c.channel.theta = ch.theta_rad.unwrap_or(c.channel.theta);
        if let Some(k) = ch.rician_factor_db {
            c.channel.rician_kappa = 10f64.powf(k / 10.0);
        }
        if let Some(m) = self.mobility {
            c.mobility = m;
        }
        let l = self.learning;
        c.samples_per_position = l.samples_per_position.unwrap_or(c.samples_per_position);
        c.gev_learning_rate = l.gev_learning_rate.unwrap_or(c.gev_learning_rate);
        c.training_positions = l.training_positions.unwrap_or(c.training_positions);
        c.gpr_restarts = l.gpr_restarts.unwrap_or(c.gpr_restarts);
        let p = self.placement;
        c.origin = p.origin_m.unwrap_or(c.origin);
        c.max_displacement = p.max_displacement_m.unwrap_or(c.max_displacement);
        c.placement_step = p.step_size.unwrap_or(c.placement_step);
        if let Some(w) = p.biased_zone_weights {
            c.biased_zone_weights = w;
        }
        c.evaluation_blocks = self.evaluation.blocks.unwrap_or(c.evaluation_blocks);
        c.validate()?;
        Ok(c)
    }

    /// Fully populated file for a config.
    pub fn from_config(c: &ExperimentConfig) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            master_seed: Some(c.master_seed),
            network: NetworkSection {
                num_vues: Some(c.num_vues),
                slots_per_block: Some(c.slots_per_block),
                slot_length_s: Some(c.slot_length),
                tx_power_dbm: Some(watts_to_dbm(c.tx_power)),
                bandwidth_hz: Some(c.bandwidth),
                noise_psd_dbm_per_hz: Some(watts_to_dbm(c.noise_psd)),
                delay_threshold_s: Some(c.delay_threshold),
                epsilon: Some(c.epsilon),
            },
            resolutions: Some(c.resolutions.clone()),
            area: AreaSection {
                half_width_m: Some(c.area.half_width),
                road_offsets_x_m: Some(c.area.road_offsets_x.clone()),
                road_offsets_y_m: Some(c.area.road_offsets_y.clone()),
                zone_splits_x_m: Some(c.area.zone_splits_x.clone()),
                zone_splits_y_m: Some(c.area.zone_splits_y.clone()),
                uav_altitude_m: Some(c.area.uav_altitude),
            },
            channel: ChannelSection {
                phi: Some(c.channel.phi),
                theta_rad: Some(c.channel.theta),
                rician_factor_db: Some(10.0 * c.channel.rician_kappa.log10()),
            },
            mobility: Some(c.mobility.clone()),
            learning: LearningSection {
                samples_per_position: Some(c.samples_per_position),
                gev_learning_rate: Some(c.gev_learning_rate),
                training_positions: Some(c.training_positions),
                gpr_restarts: Some(c.gpr_restarts),
            },
            placement: PlacementSection {
                origin_m: Some(c.origin),
                max_displacement_m: Some(c.max_displacement),
                step_size: Some(c.placement_step),
                biased_zone_weights: Some(c.biased_zone_weights.clone()),
            },
            evaluation: EvaluationSection {
                blocks: Some(c.evaluation_blocks),
            },
        }
    }
}
