//! Manhattan-grid random-walk mobility.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{road_segments, AreaSpec, Axis, Distribution, ExperimentConfig, RoadSegment, ZoneId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Heading {
    pub fn axis(self) -> Axis {
        match self {
            Heading::PosX | Heading::NegX => Axis::X,
            Heading::PosY | Heading::NegY => Axis::Y,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Heading::PosX | Heading::PosY => 1.0,
            Heading::NegX | Heading::NegY => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Heading::PosX => Heading::NegX,
            Heading::NegX => Heading::PosX,
            Heading::PosY => Heading::NegY,
            Heading::NegY => Heading::PosY,
        }
    }

    /// Counter-clockwise quarter turn.
    pub fn left(self) -> Self {
        match self {
            Heading::PosX => Heading::PosY,
            Heading::PosY => Heading::NegX,
            Heading::NegX => Heading::NegY,
            Heading::NegY => Heading::PosX,
        }
    }

    pub fn right(self) -> Self {
        self.left().reversed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: [f64; 2],
    pub heading: Heading,
    /// Displacement per slot, meters.
    pub speed: f64,
}

impl VehicleState {
    /// True when the vehicle sits on the road its heading runs along.
    pub fn is_on_road(&self, area: &AreaSpec) -> bool {
        if !area.contains(self.position) {
            return false;
        }
        let [x, y] = self.position;
        match self.heading.axis() {
            Axis::X => area.road_offsets_y.contains(&y),
            Axis::Y => area.road_offsets_x.contains(&x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilitySpec {
    /// Per-vehicle speed is drawn uniformly from `[speed_min, speed_max]` m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    pub p_straight: f64,
    pub p_left: f64,
    pub p_right: f64,
}

impl Default for MobilitySpec {
    fn default() -> Self {
        Self {
            speed_min: 8.0,
            speed_max: 14.0,
            p_straight: 0.5,
            p_left: 0.25,
            p_right: 0.25,
        }
    }
}

impl MobilitySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_min >= 0.0 && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return Err(Error::Config(format!(
                "speed range [{}, {}] is invalid",
                self.speed_min, self.speed_max
            )));
        }
        let p = [self.p_straight, self.p_left, self.p_right];
        if p.iter().any(|&v| !(v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("turn probabilities must be nonnegative and sum to 1".into()));
        }
        Ok(())
    }

    fn turn<R: Rng + ?Sized>(&self, heading: Heading, rng: &mut R) -> Heading {
        let u: f64 = rng.random();
        if u < self.p_straight {
            heading
        } else if u < self.p_straight + self.p_left {
            heading.left()
        } else {
            heading.right()
        }
    }
}

/// Advances a vehicle by one slot.
///
/// The vehicle travels `speed` meters along its road. Each intersection it
/// reaches triggers a straight/left/right draw; reaching the area edge reverses
/// the heading. Event points are assigned exactly so the on-road invariant
/// holds bit-for-bit.
pub fn step_mobility<R: Rng + ?Sized>(
    state: &VehicleState,
    area: &AreaSpec,
    mobility: &MobilitySpec,
    rng: &mut R,
) -> VehicleState {
    let mut s = *state;
    let mut remaining = s.speed;
    let hw = area.half_width;
    // Bounded so pathological configs cannot spin forever.
    let mut events = 0usize;
    while remaining > 0.0 && events < 10_000 {
        let (along, crossings) = match s.heading.axis() {
            Axis::X => (s.position[0], &area.road_offsets_x),
            Axis::Y => (s.position[1], &area.road_offsets_y),
        };
        let sign = s.heading.sign();
        let boundary = sign * hw;
        let mut target = boundary;
        let mut is_boundary = true;
        for &c in crossings {
            if (c - along) * sign > 0.0 && (c - target) * sign < 0.0 {
                target = c;
                is_boundary = false;
            }
        }
        let dist = (target - along).abs();
        if dist > remaining {
            let moved = along + sign * remaining;
            set_along(&mut s, moved);
            break;
        }
        set_along(&mut s, target);
        remaining -= dist;
        events += 1;
        if is_boundary {
            s.heading = s.heading.reversed();
        } else {
            s.heading = mobility.turn(s.heading, rng);
        }
    }
    s
}

fn set_along(s: &mut VehicleState, v: f64) {
    match s.heading.axis() {
        Axis::X => s.position[0] = v,
        Axis::Y => s.position[1] = v,
    }
}

fn draw_speed<R: Rng + ?Sized>(mobility: &MobilitySpec, slot_length: f64, rng: &mut R) -> f64 {
    let mps = if mobility.speed_max > mobility.speed_min {
        rng.random_range(mobility.speed_min..=mobility.speed_max)
    } else {
        mobility.speed_min
    };
    mps * slot_length
}

fn place_on<R: Rng + ?Sized>(
    seg: &RoadSegment,
    mobility: &MobilitySpec,
    slot_length: f64,
    rng: &mut R,
) -> VehicleState {
    let along = seg.from + rng.random::<f64>() * seg.length();
    let forward = rng.random::<bool>();
    let heading = match (seg.axis, forward) {
        (Axis::X, true) => Heading::PosX,
        (Axis::X, false) => Heading::NegX,
        (Axis::Y, true) => Heading::PosY,
        (Axis::Y, false) => Heading::NegY,
    };
    VehicleState {
        position: seg.point(along),
        heading,
        speed: draw_speed(mobility, slot_length, rng),
    }
}

fn pick_segment<'a, R: Rng + ?Sized>(
    segments: &[&'a RoadSegment],
    rng: &mut R,
) -> &'a RoadSegment {
    let total: f64 = segments.iter().map(|s| s.length()).sum();
    let mut u = rng.random::<f64>() * total;
    for seg in segments {
        if u < seg.length() {
            return seg;
        }
        u -= seg.length();
    }
    segments[segments.len() - 1]
}

/// Uniform on-road position inside `zone`, random direction of travel.
pub fn spawn_in_zone<R: Rng + ?Sized>(
    area: &AreaSpec,
    mobility: &MobilitySpec,
    slot_length: f64,
    zone: ZoneId,
    rng: &mut R,
) -> Result<VehicleState> {
    let all = road_segments(area);
    let segs: Vec<&RoadSegment> = all.iter().filter(|s| s.zone == zone).collect();
    if segs.is_empty() {
        return Err(Error::Config(format!("zone {zone} contains no road")));
    }
    Ok(place_on(pick_segment(&segs, rng), mobility, slot_length, rng))
}

/// Uniform position over the whole road network.
pub fn spawn_uniform<R: Rng + ?Sized>(
    area: &AreaSpec,
    mobility: &MobilitySpec,
    slot_length: f64,
    rng: &mut R,
) -> Result<VehicleState> {
    let all = road_segments(area);
    if all.is_empty() {
        return Err(Error::Config("road set is empty".into()));
    }
    let segs: Vec<&RoadSegment> = all.iter().collect();
    Ok(place_on(pick_segment(&segs, rng), mobility, slot_length, rng))
}

/// Places `config.num_vues` vehicles on the road network.
pub fn spawn_vehicles<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    distribution: &Distribution,
    rng: &mut R,
) -> Result<Vec<VehicleState>> {
    let area = &config.area;
    let all = road_segments(area);
    if all.is_empty() {
        return Err(Error::Config("road set is empty".into()));
    }
    let (mob, slot) = (&config.mobility, config.slot_length);
    match distribution {
        Distribution::Even => {
            let segs: Vec<&RoadSegment> = all.iter().collect();
            Ok((0..config.num_vues)
                .map(|_| place_on(pick_segment(&segs, rng), mob, slot, rng))
                .collect())
        }
        Distribution::Biased(weights) => {
            if weights.len() != area.zone_count() {
                return Err(Error::Config(format!(
                    "{} zone weights given for {} zones",
                    weights.len(),
                    area.zone_count()
                )));
            }
            if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(Error::Config("zone weights must be finite and nonnegative".into()));
            }
            let per_zone: Vec<Vec<&RoadSegment>> = area
                .zones()
                .map(|z| all.iter().filter(|s| s.zone == z).collect())
                .collect();
            // Zones without road cannot host vehicles.
            let eff: Vec<f64> = weights
                .iter()
                .zip(&per_zone)
                .map(|(&w, segs)| if segs.is_empty() { 0.0 } else { w })
                .collect();
            let total: f64 = eff.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Config("zone weights must have a positive sum over road-bearing zones".into()));
            }
            let mut out = Vec::with_capacity(config.num_vues);
            for _ in 0..config.num_vues {
                let mut u = rng.random::<f64>() * total;
                let mut zi = eff.len() - 1;
                for (i, &w) in eff.iter().enumerate() {
                    if u < w {
                        zi = i;
                        break;
                    }
                    u -= w;
                }
                while eff[zi] == 0.0 {
                    zi -= 1;
                }
                out.push(place_on(pick_segment(&per_zone[zi], rng), mob, slot, rng));
            }
            Ok(out)
        }
    }
}
