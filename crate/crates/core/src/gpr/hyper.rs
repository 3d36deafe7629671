//! Hyperparameter training by log-marginal-likelihood ascent.

use nalgebra::DVector;

use super::{kernel_matrix, sq_dist, GprHyper};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log marginal likelihood -1/2 y'A^-1 y - 1/2 ln det A - K/2 ln 2pi with
/// A = C + lambda I, and its gradient in (ln gamma, ln ell, ln lambda).
pub fn log_marginal_likelihood(positions: &[[f64; 2]], targets: &[f64], hyper: &GprHyper) -> Result<(f64, [f64; 3])> {
    hyper.validate()?;
    let k = positions.len();
    let c = kernel_matrix(positions, hyper);
    let mut a = c.clone();
    for i in 0..k {
        a[(i, i)] += hyper.lambda;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Conditioning("C + lambda I is not positive definite".into()))?;
    let y = DVector::from_column_slice(targets);
    let alpha = chol.solve(&y);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * k as f64 * LN_2PI;
    if !lml.is_finite() {
        return Err(Error::Conditioning("non-finite marginal likelihood".into()));
    }
    let a_inv = chol.inverse();
    // W = alpha alpha' - A^-1; d lml / d theta = 1/2 tr(W dA/dtheta).
    let mut g = [0.0; 3];
    for i in 0..k {
        for j in 0..k {
            let w = alpha[i] * alpha[j] - a_inv[(i, j)];
            let cij = c[(i, j)];
            g[0] += w * cij;
            g[1] += w * cij * sq_dist(positions[i], positions[j]) / (2.0 * hyper.ell);
        }
        g[2] += (alpha[i] * alpha[i] - a_inv[(i, i)]) * hyper.lambda;
    }
    Ok((lml, [0.5 * g[0], 0.5 * g[1], 0.5 * g[2]]))
}

struct Bounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Bounds {
    fn clamp(&self, t: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| t[i].clamp(self.lo[i], self.hi[i]))
    }
}

fn pair_sq_distances(positions: &[[f64; 2]]) -> Vec<f64> {
    let mut d = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            d.push(sq_dist(positions[i], positions[j]));
        }
    }
    d
}

fn target_scale(targets: &[f64]) -> f64 {
    let v = targets.iter().map(|t| t * t).sum::<f64>() / targets.len() as f64;
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

fn check_inputs(positions: &[[f64; 2]], targets: &[f64]) -> Result<Vec<f64>> {
    if positions.len() != targets.len() {
        return Err(Error::Domain(format!(
            "{} positions but {} targets",
            positions.len(),
            targets.len()
        )));
    }
    if positions.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 training positions, got {}", positions.len())));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("non-finite regression target".into()));
    }
    let mut d: Vec<f64> = pair_sq_distances(positions).into_iter().filter(|&x| x > 0.0).collect();
    if d.is_empty() {
        return Err(Error::Conditioning("all training positions coincide".into()));
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn bounds(targets: &[f64], sorted_d: &[f64]) -> Bounds {
    let v = target_scale(targets);
    let (dmin, dmax) = (sorted_d[0], sorted_d[sorted_d.len() - 1]);
    Bounds {
        lo: [(v * 1e-4).ln(), (dmin / 16.0).ln(), (v * 1e-12).ln()],
        hi: [(v * 1e4).ln(), (dmax * 100.0).ln(), (v * 10.0).ln()],
    }
}

/// Data-scaled starting hyperparameters: gamma = mean(y^2), lengthscale equal
/// to half the median pairwise distance, lambda = 1e-3 gamma.
pub fn default_hyper(positions: &[[f64; 2]], targets: &[f64]) -> Result<GprHyper> {
    let d = check_inputs(positions, targets)?;
    let v = target_scale(targets);
    Ok(GprHyper {
        gamma: v,
        ell: d[d.len() / 2] / 4.0,
        lambda: 1e-3 * v,
    })
}

fn to_hyper(t: [f64; 3]) -> GprHyper {
    GprHyper {
        gamma: t[0].exp(),
        ell: t[1].exp(),
        lambda: t[2].exp(),
    }
}

/// Radical inverse of `i` in `base` (Halton sequence).
fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Projected gradient ascent with Armijo backtracking inside the box.
fn ascend(eval: &dyn Fn([f64; 3]) -> Option<(f64, [f64; 3])>, b: &Bounds, start: [f64; 3]) -> Option<([f64; 3], f64)> {
    let mut t = b.clamp(start);
    let (mut f, mut g) = eval(t)?;
    let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    let mut step = 1.0 / gn.max(1.0);
    for _ in 0..300 {
        let mut accepted = None;
        for _ in 0..40 {
            let cand = b.clamp([0, 1, 2].map(|i| t[i] + step * g[i]));
            let moved: f64 = (0..3).map(|i| g[i] * (cand[i] - t[i])).sum();
            if moved <= 0.0 {
                break;
            }
            if let Some((fc, gc)) = eval(cand) {
                if fc >= f + 1e-4 * moved {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        let df = fc - f;
        t = cand;
        f = fc;
        g = gc;
        step *= 2.0;
        if df < 1e-10 * (1.0 + f.abs()) {
            break;
        }
    }
    Some((t, f))
}

/// Maximizes the log marginal likelihood over (gamma, ell, lambda).
///
/// Runs the ascent from the data-scaled default and from `restarts` Halton
/// points (bases 2, 3, 5) spread over a box scaled to the targets and the
/// pairwise distances, and keeps the best end point. The result is never
/// worse than the default.
pub fn fit_hyperparameters(positions: &[[f64; 2]], targets: &[f64], restarts: usize) -> Result<GprHyper> {
    let d = check_inputs(positions, targets)?;
    let b = bounds(targets, &d);
    let def = default_hyper(positions, targets)?;
    let eval = |t: [f64; 3]| log_marginal_likelihood(positions, targets, &to_hyper(t)).ok();
    let mut starts = vec![b.clamp([def.gamma.ln(), def.ell.ln(), def.lambda.ln()])];
    for i in 1..=restarts {
        let u = [halton(i, 2), halton(i, 3), halton(i, 5)];
        starts.push([0, 1, 2].map(|k| b.lo[k] + u[k] * (b.hi[k] - b.lo[k])));
    }
    let mut best: Option<([f64; 3], f64)> = None;
    for s in starts {
        if let Some((t, f)) = ascend(&eval, &b, s) {
            if best.map_or(true, |(_, bf)| f > bf) {
                best = Some((t, f));
            }
        }
    }
    match best {
        Some((t, _)) => Ok(to_hyper(t)),
        None => Err(Error::Conditioning("marginal likelihood undefined at every start".into())),
    }
}
