//! Air-to-ground channel gain and per-slot transmission delay.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ExperimentConfig, ZoneId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub phi: f64,
    /// Antenna half-beamwidth, radians.
    pub theta: f64,
    /// Rician factor, linear. `f64::INFINITY` means pure line of sight.
    pub rician_kappa: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            phi: 3.24e-4,
            theta: (24.0 * std::f64::consts::SQRT_2 / 5.0).atan(),
            rician_kappa: 10f64.powf(1.2),
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::Config(format!("phi must be positive, got {}", self.phi)));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!("theta must lie in (0, pi/2), got {}", self.theta)));
        }
        if !(self.rician_kappa >= 0.0) {
            return Err(Error::Config(format!("rician_kappa must be nonnegative, got {}", self.rician_kappa)));
        }
        Ok(())
    }
}

/// One collected block maximum of the normalized delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySample {
    /// Seconds.
    pub value: f64,
    pub zone: ZoneId,
    pub uav_position: [f64; 2],
    pub block_index: u64,
}

/// Draws |psi|^2 for a Rician channel with unit mean power.
///
/// The line-of-sight amplitude sqrt(kappa/(1+kappa)) is split evenly over the
/// real and imaginary parts and each part carries diffuse variance
/// 1/(2+2kappa), so E|psi|^2 = 1 for every kappa.
pub fn draw_fading<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> f64 {
    let k = spec.rician_kappa;
    if k.is_infinite() {
        return 1.0;
    }
    let mean = (k / (2.0 + 2.0 * k)).sqrt();
    let sd = (1.0 / (2.0 + 2.0 * k)).sqrt();
    let zr: f64 = rng.sample(StandardNormal);
    let zi: f64 = rng.sample(StandardNormal);
    let re = mean + sd * zr;
    let im = mean + sd * zi;
    re * re + im * im
}

/// h = phi |psi|^2 / (theta D)^2 with D the 3-D UAV-to-vehicle distance.
pub fn channel_gain(uav: [f64; 3], vue: [f64; 2], spec: &ChannelSpec, fading: f64) -> Result<f64> {
    let d2 = squared_distance(uav, vue);
    if !(d2 > 0.0) {
        return Err(Error::DegenerateGeometry("UAV and vehicle coincide".into()));
    }
    Ok(spec.phi * fading / (spec.theta * spec.theta * d2))
}

pub(crate) fn squared_distance(uav: [f64; 3], vue: [f64; 2]) -> f64 {
    let dx = uav[0] - vue[0];
    let dy = uav[1] - vue[1];
    dx * dx + dy * dy + uav[2] * uav[2]
}

/// Link constants reused for every slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub bandwidth: f64,
    /// P / (N0 W): SNR per unit gain.
    pub snr_per_gain: f64,
}

impl LinkBudget {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            bandwidth: cfg.bandwidth,
            snr_per_gain: cfg.tx_power / (cfg.noise_psd * cfg.bandwidth),
        }
    }

    /// W log2(1 + P h / (N0 W)), bits per second.
    #[inline]
    pub fn rate(&self, h: f64) -> f64 {
        self.bandwidth * (self.snr_per_gain * h).ln_1p() / std::f64::consts::LN_2
    }

    /// Seconds to move `bits` at gain `h`; +inf when the gain is zero.
    #[inline]
    pub fn delay(&self, bits: f64, h: f64) -> f64 {
        let r = self.rate(h);
        if r > 0.0 {
            bits / r
        } else {
            f64::INFINITY
        }
    }
}

/// T = A V / (W log2(1 + P h / (N0 W))).
///
/// Returns +inf for h = 0; callers must not store that as a finite sample.
pub fn slot_delay(bits: f64, num_vues: usize, h: f64, cfg: &ExperimentConfig) -> Result<f64> {
    if !(bits > 0.0) {
        return Err(Error::Domain(format!("image size must be positive, got {bits}")));
    }
    if num_vues == 0 {
        return Err(Error::Domain("vehicle count must be positive".into()));
    }
    if !(cfg.bandwidth > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {}", cfg.bandwidth)));
    }
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("channel gain must be nonnegative, got {h}")));
    }
    Ok(LinkBudget::from_config(cfg).delay(bits * num_vues as f64, h))
}

/// Delay of the smallest image without the bandwidth split: A_1 / (W log2(1+SNR)).
pub fn normalized_slot_delay(h: f64, cfg: &ExperimentConfig) -> Result<f64> {
    slot_delay(cfg.base_image_bits(), 1, h, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    #[test]
    fn default_theta_value() {
        let t = ChannelSpec::default().theta;
        // tan(theta) = 24 sqrt(2) / 5
        assert!((t.tan() - 6.788_225_099_390_857).abs() < 1e-12);
        assert!((t - 1.424_534_388_895_467_6).abs() < 1e-12);
    }

    fn mean_fading(kappa: f64, n: usize, seed: u64) -> (f64, f64) {
        let spec = ChannelSpec {
            rician_kappa: kappa,
            ..ChannelSpec::default()
        };
        let mut rng = stream(seed, Purpose::Synthetic, &[]);
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = draw_fading(&spec, &mut rng);
            s += x;
            s2 += x * x;
        }
        let m = s / n as f64;
        (m, s2 / n as f64 - m * m)
    }

    #[test]
    fn rician_mean_power_is_one() {
        let (m, _) = mean_fading(10f64.powf(1.2), 1_000_000, 1);
        assert!((m - 1.0).abs() < 0.005, "{m}");
    }

    #[test]
    fn rayleigh_limit_is_unit_exponential() {
        // Exponential(1): mean 1, variance 1.
        let (m, v) = mean_fading(0.0, 400_000, 2);
        assert!((m - 1.0).abs() < 0.01, "{m}");
        assert!((v - 1.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn pure_line_of_sight_is_deterministic() {
        let spec = ChannelSpec {
            rician_kappa: f64::INFINITY,
            ..ChannelSpec::default()
        };
        let mut rng = stream(3, Purpose::Synthetic, &[]);
        for _ in 0..10 {
            assert_eq!(draw_fading(&spec, &mut rng), 1.0);
        }
        let (m, v) = mean_fading(1e12, 10_000, 4);
        assert!((m - 1.0).abs() < 1e-5 && v < 1e-10);
    }

    #[test]
    fn gain_directly_below() {
        let spec = ChannelSpec::default();
        let h = channel_gain([0.0, 0.0, 50.0], [0.0, 0.0], &spec, 1.0).unwrap();
        let theta = (24.0 * 2f64.sqrt() / 5.0).atan();
        let expect = 3.24e-4 / (theta * 50.0).powi(2);
        assert!((h / expect - 1.0).abs() < 1e-14);
        assert!((h - 6.387e-8).abs() < 1e-10, "{h}");
    }

    #[test]
    fn gain_inverse_square_and_zero() {
        let spec = ChannelSpec::default();
        let h1 = channel_gain([0.0, 0.0, 30.0], [40.0, 0.0], &spec, 0.7).unwrap();
        let h2 = channel_gain([0.0, 0.0, 60.0], [80.0, 0.0], &spec, 0.7).unwrap();
        assert_eq!(h1, 4.0 * h2);
        assert_eq!(channel_gain([1.0, 2.0, 50.0], [0.0, 0.0], &spec, 0.0).unwrap(), 0.0);
        assert!(matches!(
            channel_gain([1.0, 2.0, 0.0], [1.0, 2.0], &spec, 1.0),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn delay_round_number() {
        let c = cfg();
        // log2(1 + snr) = 10
        let h = 1023.0 / LinkBudget::from_config(&c).snr_per_gain;
        let t = slot_delay(2.5e6, 200, h, &c).unwrap();
        assert!((t - 1.0).abs() < 1e-12, "{t}");
        let t2 = slot_delay(5e6, 200, h, &c).unwrap();
        assert!((t2 - 2.0).abs() < 2e-12);
    }

    #[test]
    fn delay_below_uav_matches_closed_form() {
        let c = cfg();
        let theta = (24.0 * 2f64.sqrt() / 5.0).atan();
        let h = 3.24e-4 / (theta * 50.0).powi(2);
        let snr = 1.0 * h / (10f64.powf(-20.4) * 50e6);
        let expect = 2.5e6 * 200.0 / (50e6 * (1.0 + snr).log2());
        let t = slot_delay(2.5e6, 200, h, &c).unwrap();
        assert!((t / expect - 1.0).abs() < 1e-12, "{t} {expect}");
        let n = normalized_slot_delay(h, &c).unwrap();
        assert!(n > 0.0 && n.is_finite());
        assert!((n * 200.0 / t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_gain_is_infinite_and_bad_inputs_rejected() {
        let c = cfg();
        assert_eq!(slot_delay(1.0, 1, 0.0, &c).unwrap(), f64::INFINITY);
        assert!(slot_delay(0.0, 1, 1e-8, &c).is_err());
        assert!(slot_delay(1.0, 0, 1e-8, &c).is_err());
        let mut bad = c.clone();
        bad.bandwidth = 0.0;
        assert!(slot_delay(1.0, 1, 1e-8, &bad).is_err());
    }

    proptest! {
        #[test]
        fn scaling_and_monotonicity(h in 1e-12f64..1e-4, f in 1.01f64..10.0, c in 0.1f64..10.0, v in 1usize..500) {
            let cfg = cfg();
            let t = slot_delay(2.5e6, v, h, &cfg).unwrap();
            let tc = slot_delay(2.5e6 * c, v, h, &cfg).unwrap();
            prop_assert!((tc / (c * t) - 1.0).abs() < 1e-12);
            prop_assert!(slot_delay(2.5e6, v, h * f, &cfg).unwrap() < t);
            let n = normalized_slot_delay(h, &cfg).unwrap();
            prop_assert!((n / (t / v as f64) - 1.0).abs() < 1e-12);
        }
    }
}
