//! Continuous payload sizing, resolution snapping and projected gradient
//! descent over the UAV position.
//!
//! For a UAV position `e`, each vehicle's zone supplies predicted
//! (mu, sigma, zeta). The largest payload meeting the URLLC constraint with
//! equality is `B* = a / (sigma zeta + mu)` with `a = A_1 T_th / V`, and the
//! position problem minimizes `sum_i -a_i / (sigma_i zeta_i + mu_i)` over the
//! disk of radius d_th around the origin, subject to `B*_i >= A_1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::ZoneModel;
use crate::scenario::{zone_of, ExperimentConfig, Resolution, VehicleState, ZoneId};

/// Floor applied to predicted sigma and zeta.
pub const SIGMA_MIN: f64 = 1e-6;
pub const ZETA_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VueContext {
    pub vue_id: usize,
    /// Zone at optimization time.
    pub zone: ZoneId,
    /// a_i = A_1 T_th / V, bit-seconds.
    pub a: f64,
}

/// Freezes each vehicle's zone and payload coefficient.
pub fn vue_contexts(vehicles: &[VehicleState], config: &ExperimentConfig) -> Result<Vec<VueContext>> {
    let a = config.payload_coefficient();
    vehicles
        .iter()
        .enumerate()
        .map(|(vue_id, v)| {
            Ok(VueContext {
                vue_id,
                zone: zone_of(v.position, &config.area)?,
                a,
            })
        })
        .collect()
}

/// Predicted GEV characteristics of a vehicle's normalized delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub mu: f64,
    pub sigma: f64,
    pub zeta: f64,
}

impl EffectiveParams {
    /// sigma zeta + mu: the normalized delay budget per bit of a_i.
    pub fn denominator(&self) -> f64 {
        self.sigma * self.zeta + self.mu
    }
}

fn find_model(models: &[ZoneModel], zone: ZoneId) -> Result<&ZoneModel> {
    models
        .iter()
        .find(|m| m.zone == zone)
        .ok_or(Error::MissingZoneModel(zone.index()))
}

/// Zone-level prediction with value, gradient and clamp flags.
#[derive(Debug, Clone, Copy)]
struct ZonePrediction {
    params: EffectiveParams,
    grad_den: [f64; 2],
    clamped: usize,
}

fn predict_zone(model: &ZoneModel, e: [f64; 2]) -> ZonePrediction {
    let (mu, gmu) = model.model_mu.predict_with_grad(e);
    let (sigma_raw, gsigma) = model.model_sigma.predict_with_grad(e);
    let (zeta_raw, gzeta) = model.model_zeta.predict_with_grad(e);
    let mut clamped = 0;
    let (sigma, gsigma) = if sigma_raw < SIGMA_MIN {
        clamped += 1;
        (SIGMA_MIN, [0.0; 2])
    } else {
        (sigma_raw, gsigma)
    };
    let (zeta, gzeta) = if zeta_raw < ZETA_MIN {
        clamped += 1;
        (ZETA_MIN, [0.0; 2])
    } else {
        (zeta_raw, gzeta)
    };
    // grad(sigma zeta + mu) = grad mu + zeta grad sigma + sigma grad zeta
    let grad_den = [0, 1].map(|k| gmu[k] + zeta * gsigma[k] + sigma * gzeta[k]);
    ZonePrediction {
        params: EffectiveParams { mu, sigma, zeta },
        grad_den,
        clamped,
    }
}

/// Per-vehicle (mu, sigma, zeta) at UAV position `e`, plus the number of
/// clamps applied (counted per vehicle and parameter).
pub fn effective_params(models: &[ZoneModel], e: [f64; 2], vues: &[VueContext]) -> Result<(Vec<EffectiveParams>, usize)> {
    let mut cache: Vec<(ZoneId, ZonePrediction)> = Vec::new();
    let mut out = Vec::with_capacity(vues.len());
    let mut clamps = 0;
    for v in vues {
        let pred = match cache.iter().find(|(z, _)| *z == v.zone) {
            Some((_, p)) => *p,
            None => {
                let p = predict_zone(find_model(models, v.zone)?, e);
                cache.push((v.zone, p));
                p
            }
        };
        clamps += pred.clamped;
        out.push(pred.params);
    }
    Ok((out, clamps))
}

/// B* = a / (sigma zeta + mu).
pub fn optimal_payload(params: &EffectiveParams, a: f64) -> Result<f64> {
    let den = params.denominator();
    if !(den > 0.0) {
        return Err(Error::InfeasibleChannel(den));
    }
    Ok(a / den)
}

/// Largest level (1-based) whose size does not exceed `b_star`. Returns
/// level 1 and `false` when even the smallest size does not fit.
pub fn select_resolution(b_star: f64, resolutions: &[Resolution]) -> Result<(usize, bool)> {
    if resolutions.is_empty() {
        return Err(Error::Empty("resolution list"));
    }
    match resolutions.iter().rposition(|r| r.bits <= b_star) {
        Some(i) => Ok((i + 1, true)),
        None => Ok((1, false)),
    }
}

/// One zone's aggregated contribution.
#[derive(Debug, Clone, Copy)]
struct ZoneTerm<'a> {
    model: &'a ZoneModel,
    /// Sum of a_i over the zone's vehicles.
    a_sum: f64,
    /// Smallest a_i in the zone (binds the B* >= A_1 constraint).
    a_min: f64,
}

/// The position problem for a frozen set of vehicles.
struct Problem<'a> {
    terms: Vec<ZoneTerm<'a>>,
    origin: [f64; 2],
    d_th: f64,
    a1: f64,
}

impl<'a> Problem<'a> {
    fn new(models: &'a [ZoneModel], vues: &[VueContext], origin: [f64; 2], d_th: f64, a1: f64) -> Result<Self> {
        let mut terms: Vec<(ZoneId, ZoneTerm<'a>)> = Vec::new();
        for v in vues {
            if !(v.a > 0.0) {
                return Err(Error::Domain(format!("payload coefficient must be positive, got {}", v.a)));
            }
            match terms.iter_mut().find(|(z, _)| *z == v.zone) {
                Some((_, t)) => {
                    t.a_sum += v.a;
                    t.a_min = t.a_min.min(v.a);
                }
                None => terms.push((
                    v.zone,
                    ZoneTerm {
                        model: find_model(models, v.zone)?,
                        a_sum: v.a,
                        a_min: v.a,
                    },
                )),
            }
        }
        terms.sort_by_key(|(z, _)| *z);
        Ok(Self {
            terms: terms.into_iter().map(|(_, t)| t).collect(),
            origin,
            d_th,
            a1,
        })
    }

    /// Objective sum -a_i/den and its gradient sum a_i/den^2 grad(den).
    fn objective_and_grad(&self, e: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let mut f = 0.0;
        let mut g = [0.0; 2];
        for t in &self.terms {
            let p = predict_zone(t.model, e);
            let den = p.params.denominator();
            if !(den > 0.0) {
                return Err(Error::InfeasibleChannel(den));
            }
            f -= t.a_sum / den;
            let w = t.a_sum / (den * den);
            g[0] += w * p.grad_den[0];
            g[1] += w * p.grad_den[1];
        }
        Ok((f, g))
    }

    fn objective(&self, e: [f64; 2]) -> Result<f64> {
        let mut f = 0.0;
        for t in &self.terms {
            let den = predict_zone(t.model, e).params.denominator();
            if !(den > 0.0) {
                return Err(Error::InfeasibleChannel(den));
            }
            f -= t.a_sum / den;
        }
        Ok(f)
    }

    fn in_disk(&self, e: [f64; 2]) -> bool {
        dist(e, self.origin) <= self.d_th
    }

    /// B*_i >= A_1 for every vehicle.
    fn payload_feasible(&self, e: [f64; 2]) -> bool {
        self.terms.iter().all(|t| {
            let den = predict_zone(t.model, e).params.denominator();
            den > 0.0 && t.a_min / den >= self.a1
        })
    }

    fn feasible(&self, e: [f64; 2]) -> bool {
        self.in_disk(e) && self.payload_feasible(e)
    }

    fn disk_projection(&self, e: [f64; 2]) -> [f64; 2] {
        let r = dist(e, self.origin);
        if r <= self.d_th {
            return e;
        }
        let s = self.d_th / r;
        let p = [
            self.origin[0] + s * (e[0] - self.origin[0]),
            self.origin[1] + s * (e[1] - self.origin[1]),
        ];
        // Guard against rounding just outside the circle.
        if dist(p, self.origin) > self.d_th {
            let s = s * (1.0 - f64::EPSILON);
            [
                self.origin[0] + s * (e[0] - self.origin[0]),
                self.origin[1] + s * (e[1] - self.origin[1]),
            ]
        } else {
            p
        }
    }

    /// Distance along direction `theta` from `e` to the first feasible point,
    /// or `None` if the ray leaves the search radius first.
    fn first_feasible_on_ray(&self, e: [f64; 2], theta: f64, max_r: f64) -> Option<f64> {
        let dir = [theta.cos(), theta.sin()];
        let at = |r: f64| [e[0] + r * dir[0], e[1] + r * dir[1]];
        let h = (self.d_th / 256.0).max(1e-9);
        let mut prev = 0.0;
        let mut r = h;
        while r <= max_r + h {
            if self.feasible(at(r)) {
                let (mut lo, mut hi) = (prev, r);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.feasible(at(mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            prev = r;
            r += h;
        }
        None
    }

    /// Closest feasible point along rays from `e`, refined with
    /// golden-section search in the angle. Robust but only as accurate as the
    /// angle resolution allows where the boundary is flat.
    fn ray_search(&self, e: [f64; 2]) -> Option<[f64; 2]> {
        let max_r = dist(e, self.origin) + self.d_th;
        let rays = 72;
        let mut best: Option<(f64, f64)> = None;
        let mut dists = vec![f64::INFINITY; rays];
        for (k, d) in dists.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / rays as f64;
            if let Some(r) = self.first_feasible_on_ray(e, theta, max_r) {
                *d = r;
                if best.map_or(true, |(_, br)| r < br) {
                    best = Some((theta, r));
                }
            }
        }
        let (theta0, _) = best?;
        let span = 2.0 * std::f64::consts::PI / rays as f64;
        let f = |t: f64| self.first_feasible_on_ray(e, t, max_r).unwrap_or(f64::INFINITY);
        let (mut a, mut b) = (theta0 - span, theta0 + span);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if b - a < 1e-12 {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d);
            }
        }
        let mut cands = vec![(theta0, f(theta0)), (c, fc), (d, fd)];
        cands.sort_by(|x, y| x.1.total_cmp(&y.1));
        let (theta, r) = cands[0];
        if !r.is_finite() {
            return None;
        }
        let p = [e[0] + r * theta.cos(), e[1] + r * theta.sin()];
        self.feasible(p).then_some(p)
    }

    /// B*-constraint slack of one zone, den - a_min / A_1 (feasible when <= 0),
    /// and its gradient.
    fn slack(&self, t: &ZoneTerm, e: [f64; 2]) -> (f64, [f64; 2]) {
        let p = predict_zone(t.model, e);
        (p.params.denominator() - t.a_min / self.a1, p.grad_den)
    }

    /// Closest point to `c` on one zone's constraint boundary, by repeatedly
    /// projecting `c` onto the boundary's tangent line, then nudged to the
    /// feasible side.
    fn boundary_projection(&self, t: &ZoneTerm, c: [f64; 2]) -> Option<[f64; 2]> {
        let mut p = c;
        let mut converged = false;
        for _ in 0..100 {
            let (g, dg) = self.slack(t, p);
            let n2 = dg[0] * dg[0] + dg[1] * dg[1];
            if !(n2 > 0.0) || !g.is_finite() {
                return None;
            }
            let k = (g + dg[0] * (c[0] - p[0]) + dg[1] * (c[1] - p[1])) / n2;
            let q = [c[0] - k * dg[0], c[1] - k * dg[1]];
            let step = dist(q, p);
            p = q;
            if step <= 1e-13 * (1.0 + self.d_th) {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
        let (_, dg) = self.slack(t, p);
        let n = (dg[0] * dg[0] + dg[1] * dg[1]).sqrt();
        let mut tau = 1e-13 * (1.0 + self.d_th);
        for _ in 0..40 {
            let q = [p[0] - tau * dg[0] / n, p[1] - tau * dg[1] / n];
            if self.feasible(q) {
                return Some(q);
            }
            tau *= 2.0;
        }
        None
    }

    /// Points where the disk boundary crosses a B*-constraint boundary, taken
    /// on the feasible side.
    fn disk_corners(&self) -> Vec<[f64; 2]> {
        let n = 720;
        let r = self.d_th * (1.0 - 4.0 * f64::EPSILON);
        let at = |phi: f64| [self.origin[0] + r * phi.cos(), self.origin[1] + r * phi.sin()];
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let mut out = Vec::new();
        let mut prev = self.payload_feasible(at(0.0));
        for k in 1..=n {
            let phi = k as f64 * step;
            let cur = self.payload_feasible(at(phi));
            if cur != prev {
                // Keep `good` on the feasible side.
                let (mut good, mut bad) = if cur { (phi, phi - step) } else { (phi - step, phi) };
                for _ in 0..80 {
                    let mid = 0.5 * (good + bad);
                    if self.payload_feasible(at(mid)) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                out.push(at(good));
            }
            prev = cur;
        }
        out
    }

    /// Closest point of the feasible set to `c`: the best of the
    /// per-constraint boundary projections, the disk/constraint corners and a
    /// ray search.
    fn closest_feasible(&self, c: [f64; 2]) -> Option<[f64; 2]> {
        let mut cands: Vec<[f64; 2]> = self.terms.iter().filter_map(|t| self.boundary_projection(t, c)).collect();
        cands.extend(self.disk_corners());
        cands.extend(self.ray_search(c));
        cands
            .into_iter()
            .filter(|&q| self.feasible(q))
            .min_by(|a, b| dist(*a, c).total_cmp(&dist(*b, c)))
    }

    /// Maps `candidate` into the feasible set. Returns the point and whether
    /// it differs from the candidate.
    fn project(&self, candidate: [f64; 2], last_feasible: [f64; 2]) -> Result<([f64; 2], bool)> {
        if self.feasible(candidate) {
            return Ok((candidate, false));
        }
        let p = self.disk_projection(candidate);
        if self.payload_feasible(p) {
            return Ok((p, true));
        }
        if let Some(q) = self.closest_feasible(candidate) {
            return Ok((q, true));
        }
        // Fall back to halving the step back toward the last feasible iterate.
        let mut t = 1.0;
        for _ in 0..60 {
            t *= 0.5;
            let q = [
                last_feasible[0] + t * (p[0] - last_feasible[0]),
                last_feasible[1] + t * (p[1] - last_feasible[1]),
            ];
            if self.feasible(q) {
                return Ok((q, true));
            }
        }
        Err(Error::Projection(format!(
            "no feasible point found near ({}, {})",
            candidate[0], candidate[1]
        )))
    }

    /// Origin if feasible, else the first feasible point on rings around it.
    fn feasible_start(&self) -> Result<[f64; 2]> {
        if self.feasible(self.origin) {
            return Ok(self.origin);
        }
        for ring in 1..=40 {
            let r = self.d_th * ring as f64 / 40.0;
            for k in 0..72 {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / 72.0;
                let p = [self.origin[0] + r * theta.cos(), self.origin[1] + r * theta.sin()];
                if self.feasible(p) {
                    return Ok(p);
                }
            }
        }
        Err(Error::InfeasibleStart)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Objective sum_i -a_i/(sigma_i zeta_i + mu_i) and its gradient in bits per meter.
pub fn objective_and_grad(models: &[ZoneModel], e: [f64; 2], vues: &[VueContext]) -> Result<(f64, [f64; 2])> {
    Problem::new(models, vues, e, 0.0, 0.0)?.objective_and_grad(e)
}

/// Maps a candidate position into disk(origin, d_th) intersected with
/// {B*_i >= a1 for all i}. `last_feasible` anchors the fallback backtracking.
#[allow(clippy::too_many_arguments)]
pub fn project_feasible(
    candidate: [f64; 2],
    last_feasible: [f64; 2],
    origin: [f64; 2],
    d_th: f64,
    a1: f64,
    vues: &[VueContext],
    models: &[ZoneModel],
) -> Result<[f64; 2]> {
    Ok(Problem::new(models, vues, origin, d_th, a1)?
        .project(candidate, last_feasible)?
        .0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub origin: [f64; 2],
    pub max_displacement: f64,
    /// delta
    pub step: f64,
    pub max_iterations: usize,
    /// Stop once an iterate moves less than this, meters.
    pub tolerance: f64,
}

impl SolverOptions {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            origin: config.origin,
            max_displacement: config.max_displacement,
            step: config.placement_step,
            max_iterations: 10_000,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    /// UAV position in the horizontal plane, meters.
    pub e_u: [f64; 2],
    pub altitude: f64,
    pub vue_zones: Vec<ZoneId>,
    /// Continuous payload per vehicle, bits.
    pub b_star: Vec<f64>,
    /// Resolution level per vehicle, 1-based.
    pub levels: Vec<usize>,
    /// Sum of B*, bits.
    pub objective: f64,
    /// Sum of B* at the starting point, bits.
    pub initial_objective: f64,
    pub start: [f64; 2],
    pub iterations: usize,
    pub accepted_steps: usize,
    pub projections_applied: usize,
    pub clamps_applied: usize,
    /// In the disk and B*_i >= A_1 for every vehicle.
    pub feasible: bool,
    /// Stopped on the movement tolerance rather than the iteration cap.
    pub converged: bool,
    pub projection_failed: bool,
}

/// Builds B*, levels and diagnostics for a fixed position.
pub fn solution_at(
    models: &[ZoneModel],
    vues: &[VueContext],
    e: [f64; 2],
    config: &ExperimentConfig,
) -> Result<PlacementSolution> {
    let (params, clamps) = effective_params(models, e, vues)?;
    let mut b_star = Vec::with_capacity(vues.len());
    let mut levels = Vec::with_capacity(vues.len());
    let mut feasible = dist(e, config.origin) <= config.max_displacement;
    for (v, p) in vues.iter().zip(&params) {
        let b = optimal_payload(p, v.a)?;
        let (level, ok) = select_resolution(b, &config.resolutions)?;
        feasible &= ok;
        b_star.push(b);
        levels.push(level);
    }
    let objective = b_star.iter().sum();
    Ok(PlacementSolution {
        e_u: e,
        altitude: config.area.uav_altitude,
        vue_zones: vues.iter().map(|v| v.zone).collect(),
        b_star,
        levels,
        objective,
        initial_objective: objective,
        start: e,
        iterations: 0,
        accepted_steps: 0,
        projections_applied: 0,
        clamps_applied: clamps,
        feasible,
        converged: true,
        projection_failed: false,
    })
}

/// Projected gradient descent on the position objective.
///
/// Each iteration proposes `e - delta_q grad`, maps it into the feasible set
/// and accepts it only if the objective does not increase; otherwise
/// `delta_q` is halved and the iteration retried. After an accepted step
/// `delta_q` doubles again, capped at the configured delta.
pub fn solve_placement(models: &[ZoneModel], vues: &[VueContext], config: &ExperimentConfig) -> Result<PlacementSolution> {
    solve_placement_with(models, vues, config, &SolverOptions::from_config(config))
}

pub fn solve_placement_with(
    models: &[ZoneModel],
    vues: &[VueContext],
    config: &ExperimentConfig,
    opts: &SolverOptions,
) -> Result<PlacementSolution> {
    if vues.is_empty() {
        return Err(Error::Empty("vehicle set"));
    }
    let problem = Problem::new(models, vues, opts.origin, opts.max_displacement, config.base_image_bits())?;
    let start = problem.feasible_start()?;
    let mut e = start;
    let (mut f, mut g) = problem.objective_and_grad(e)?;
    let f0 = f;
    let mut delta = opts.step;
    let mut iterations = 0;
    let mut accepted = 0;
    let mut projections = 0;
    let mut converged = false;
    let mut projection_failed = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let cand = [e[0] - delta * g[0], e[1] - delta * g[1]];
        if dist(cand, e) < opts.tolerance {
            converged = true;
            break;
        }
        let (next, projected) = match problem.project(cand, e) {
            Ok(x) => x,
            Err(err) => {
                log::warn!("placement stopped: {err}");
                projection_failed = true;
                break;
            }
        };
        let fnext = problem.objective(next)?;
        if fnext <= f {
            if projected {
                projections += 1;
            }
            accepted += 1;
            let moved = dist(next, e);
            e = next;
            (f, g) = problem.objective_and_grad(e)?;
            delta = (delta * 2.0).min(opts.step);
            if moved < opts.tolerance {
                converged = true;
                break;
            }
        } else {
            delta *= 0.5;
        }
    }
    let mut sol = solution_at(models, vues, e, config)?;
    sol.feasible &= problem.feasible(e);
    sol.initial_objective = -f0;
    sol.start = start;
    sol.iterations = iterations;
    sol.accepted_steps = accepted;
    sol.projections_applied = projections;
    sol.converged = converged;
    sol.projection_failed = projection_failed;
    Ok(sol)
}
