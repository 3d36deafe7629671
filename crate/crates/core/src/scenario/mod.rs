//! Road topology, zone partition, vehicle mobility and experiment configuration.
//!
//! The area is a square box `[-half_width, half_width]^2` crossed by straight
//! roads: longitudinal roads at fixed `x` offsets and latitudinal roads at fixed
//! `y` offsets. The box is tiled by axis-aligned zone rectangles defined by
//! split lines; zones are numbered row-major starting at 1 in the lower-left
//! corner. A point lying on a split line belongs to the lower-index side.

mod config;
mod mobility;

pub use config::{
    ConfigFile, Distribution, ExperimentConfig, Resolution, CONFIG_SCHEMA_VERSION,
};
pub use mobility::{
    spawn_in_zone, spawn_uniform, spawn_vehicles, step_mobility, Heading, MobilitySpec,
    VehicleState,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zone index in `1..=Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub usize);

impl ZoneId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSpec {
    /// Half the side length of the square area, meters.
    pub half_width: f64,
    /// `x` coordinates of the longitudinal (north-south) roads.
    pub road_offsets_x: Vec<f64>,
    /// `y` coordinates of the latitudinal (east-west) roads.
    pub road_offsets_y: Vec<f64>,
    /// Interior `x` split lines of the zone grid (columns = len + 1).
    pub zone_splits_x: Vec<f64>,
    /// Interior `y` split lines of the zone grid (rows = len + 1).
    pub zone_splits_y: Vec<f64>,
    /// Fixed UAV altitude H, meters.
    pub uav_altitude: f64,
}

impl Default for AreaSpec {
    /// 240 m x 240 m grid with three roads in each direction and six zones
    /// (two rows by three columns) that each hold exactly 240 m of road.
    fn default() -> Self {
        Self {
            half_width: 120.0,
            road_offsets_x: vec![-80.0, 0.0, 80.0],
            road_offsets_y: vec![-40.0, 60.0, 100.0],
            zone_splits_x: vec![-40.0, 40.0],
            zone_splits_y: vec![40.0],
            uav_altitude: 50.0,
        }
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl AreaSpec {
    pub fn validate(&self) -> Result<()> {
        let hw = self.half_width;
        if !(hw > 0.0 && hw.is_finite()) {
            return Err(Error::Config(format!("half_width must be positive, got {hw}")));
        }
        if !(self.uav_altitude > 0.0 && self.uav_altitude.is_finite()) {
            return Err(Error::Config(format!(
                "uav_altitude must be positive, got {}",
                self.uav_altitude
            )));
        }
        for (name, offs) in [("road_offsets_x", &self.road_offsets_x), ("road_offsets_y", &self.road_offsets_y)] {
            if offs.iter().any(|o| !o.is_finite() || o.abs() > hw) {
                return Err(Error::Config(format!("{name} must lie in [-{hw}, {hw}]")));
            }
            if !strictly_increasing(offs) {
                return Err(Error::Config(format!("{name} must be strictly increasing")));
            }
        }
        for (name, splits) in [("zone_splits_x", &self.zone_splits_x), ("zone_splits_y", &self.zone_splits_y)] {
            if splits.iter().any(|s| !s.is_finite() || s.abs() >= hw) {
                return Err(Error::Config(format!("{name} must lie strictly inside the area")));
            }
            if !strictly_increasing(splits) {
                return Err(Error::Config(format!("{name} must be strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn zone_columns(&self) -> usize {
        self.zone_splits_x.len() + 1
    }

    pub fn zone_rows(&self) -> usize {
        self.zone_splits_y.len() + 1
    }

    pub fn zone_count(&self) -> usize {
        self.zone_columns() * self.zone_rows()
    }

    pub fn zones(&self) -> impl Iterator<Item = ZoneId> {
        (1..=self.zone_count()).map(ZoneId)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0].abs() <= self.half_width && p[1].abs() <= self.half_width
    }

    /// Interval index of `v` among `splits`; ties go to the lower interval.
    fn bin(splits: &[f64], v: f64) -> usize {
        splits.iter().take_while(|&&s| v > s).count()
    }

    fn bounds(splits: &[f64], hw: f64, i: usize) -> (f64, f64) {
        let lo = if i == 0 { -hw } else { splits[i - 1] };
        let hi = if i == splits.len() { hw } else { splits[i] };
        (lo, hi)
    }

    /// Rectangle `([x_lo, x_hi], [y_lo, y_hi])` of a zone.
    pub fn zone_bounds(&self, zone: ZoneId) -> Result<([f64; 2], [f64; 2])> {
        if zone.0 == 0 || zone.0 > self.zone_count() {
            return Err(Error::Config(format!("zone {zone} does not exist")));
        }
        let i = zone.0 - 1;
        let (col, row) = (i % self.zone_columns(), i / self.zone_columns());
        let (x0, x1) = Self::bounds(&self.zone_splits_x, self.half_width, col);
        let (y0, y1) = Self::bounds(&self.zone_splits_y, self.half_width, row);
        Ok(([x0, x1], [y0, y1]))
    }

    /// Total road length inside a zone.
    pub fn road_length_in_zone(&self, zone: ZoneId) -> Result<f64> {
        Ok(road_segments(self)
            .into_iter()
            .filter(|s| s.zone == zone)
            .map(|s| s.length())
            .sum())
    }
}

/// Maps a position to the unique zone rectangle containing it.
pub fn zone_of(position: [f64; 2], area: &AreaSpec) -> Result<ZoneId> {
    let [x, y] = position;
    if !area.contains(position) || !x.is_finite() || !y.is_finite() {
        return Err(Error::OutOfArea {
            x,
            y,
            half_width: area.half_width,
        });
    }
    let col = AreaSpec::bin(&area.zone_splits_x, x);
    let row = AreaSpec::bin(&area.zone_splits_y, y);
    Ok(ZoneId(row * area.zone_columns() + col + 1))
}

/// Direction a road runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Latitudinal road `y = offset`, traversed along `x`.
    X,
    /// Longitudinal road `x = offset`, traversed along `y`.
    Y,
}

/// Piece of a road clipped to one zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadSegment {
    pub axis: Axis,
    pub offset: f64,
    pub from: f64,
    pub to: f64,
    pub zone: ZoneId,
}

impl RoadSegment {
    pub fn length(&self) -> f64 {
        self.to - self.from
    }

    pub fn point(&self, along: f64) -> [f64; 2] {
        match self.axis {
            Axis::X => [along, self.offset],
            Axis::Y => [self.offset, along],
        }
    }
}

/// Splits every road into per-zone segments. Segments have positive length;
/// their union is the whole road network.
pub fn road_segments(area: &AreaSpec) -> Vec<RoadSegment> {
    let hw = area.half_width;
    let cols = area.zone_columns();
    let mut out = Vec::new();
    for &oy in &area.road_offsets_y {
        let row = AreaSpec::bin(&area.zone_splits_y, oy);
        for col in 0..cols {
            let (from, to) = AreaSpec::bounds(&area.zone_splits_x, hw, col);
            out.push(RoadSegment {
                axis: Axis::X,
                offset: oy,
                from,
                to,
                zone: ZoneId(row * cols + col + 1),
            });
        }
    }
    for &ox in &area.road_offsets_x {
        let col = AreaSpec::bin(&area.zone_splits_x, ox);
        for row in 0..area.zone_rows() {
            let (from, to) = AreaSpec::bounds(&area.zone_splits_y, hw, row);
            out.push(RoadSegment {
                axis: Axis::Y,
                offset: ox,
                from,
                to,
                zone: ZoneId(row * cols + col + 1),
            });
        }
    }
    out.retain(|s| s.length() > 0.0);
    out
}

/// Regular `side x side` grid of UAV training positions spanning the area.
pub fn training_grid(area: &AreaSpec, count: usize) -> Result<Vec<[f64; 2]>> {
    let side = (count as f64).sqrt().round() as usize;
    if side * side != count || side == 0 {
        return Err(Error::Config(format!(
            "training position count {count} is not a positive perfect square"
        )));
    }
    let hw = area.half_width;
    let coord = |i: usize| {
        if side == 1 {
            0.0
        } else {
            -hw + 2.0 * hw * i as f64 / (side - 1) as f64
        }
    };
    let mut grid = Vec::with_capacity(count);
    for iy in 0..side {
        for ix in 0..side {
            grid.push([coord(ix), coord(iy)]);
        }
    }
    Ok(grid)
}
