//! Zero-mean Gaussian-process regression over UAV positions with a
//! squared-exponential kernel.

mod hyper;

pub use hyper::{default_hyper, fit_hyperparameters, log_marginal_likelihood};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{zeta_transform, GevParams};
use crate::scenario::ZoneId;

/// Relative residual that a weight solve must reach.
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprHyper {
    /// Signal variance.
    pub gamma: f64,
    /// Squared lengthscale, m^2, as in exp(-|p - q|^2 / (2 ell)).
    pub ell: f64,
    /// Diagonal regularizer.
    pub lambda: f64,
}

impl GprHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(Error::Domain(format!("ell must be positive, got {}", self.ell)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[inline]
fn sq_dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    dx * dx + dy * dy
}

/// gamma exp(-|p - q|^2 / (2 ell)).
#[inline]
pub fn kernel(p: [f64; 2], q: [f64; 2], hyper: &GprHyper) -> f64 {
    hyper.gamma * (-sq_dist(p, q) / (2.0 * hyper.ell)).exp()
}

pub(crate) fn kernel_matrix(x: &[[f64; 2]], hyper: &GprHyper) -> DMatrix<f64> {
    let k = x.len();
    DMatrix::from_fn(k, k, |i, j| kernel(x[i], x[j], hyper))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprModel {
    pub train_positions: Vec<[f64; 2]>,
    pub targets: Vec<f64>,
    /// Hyperparameters actually used; `lambda` includes any stabilizing jitter.
    pub hyper: GprHyper,
    /// (C + lambda I)^-1 targets.
    pub alpha: Vec<f64>,
}

impl GprModel {
    /// Solves for the weight vector at fixed hyperparameters.
    ///
    /// If the Cholesky factorization fails or the refined solution misses the
    /// residual bound, jitter starting at 1e-10 gamma is added to lambda and
    /// grown tenfold until it succeeds.
    pub fn train(positions: &[[f64; 2]], targets: &[f64], hyper: GprHyper) -> Result<Self> {
        hyper.validate()?;
        if positions.is_empty() {
            return Err(Error::Empty("training positions"));
        }
        if positions.len() != targets.len() {
            return Err(Error::Domain(format!(
                "{} positions but {} targets",
                positions.len(),
                targets.len()
            )));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("non-finite regression target".into()));
        }
        let c = kernel_matrix(positions, &hyper);
        let y = DVector::from_column_slice(targets);
        let y_norm = y.norm();
        let mut jitter = 0.0;
        for _ in 0..14 {
            let lambda = hyper.lambda + jitter;
            let mut a = c.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda;
            }
            if let Some(chol) = a.clone().cholesky() {
                let mut alpha = chol.solve(&y);
                let mut residual = &y - &a * &alpha;
                for _ in 0..3 {
                    if residual.norm() <= RESIDUAL_TOL * y_norm {
                        break;
                    }
                    alpha += chol.solve(&residual);
                    residual = &y - &a * &alpha;
                }
                if residual.norm() <= RESIDUAL_TOL * y_norm {
                    return Ok(Self {
                        train_positions: positions.to_vec(),
                        targets: targets.to_vec(),
                        hyper: GprHyper { lambda, ..hyper },
                        alpha: alpha.as_slice().to_vec(),
                    });
                }
            }
            jitter = if jitter == 0.0 { 1e-10 * hyper.gamma } else { jitter * 10.0 };
        }
        Err(Error::Conditioning(format!(
            "kernel system not solvable to relative residual {RESIDUAL_TOL} (gamma={}, ell={}, lambda={})",
            hyper.gamma, hyper.ell, hyper.lambda
        )))
    }

    /// Fits hyperparameters by marginal-likelihood ascent, then trains.
    pub fn fit(positions: &[[f64; 2]], targets: &[f64], restarts: usize) -> Result<Self> {
        let hyper = fit_hyperparameters(positions, targets, restarts)?;
        Self::train(positions, targets, hyper)
    }

    /// sum_k alpha_k c(e, e_k).
    pub fn predict_mean(&self, e: [f64; 2]) -> f64 {
        self.train_positions
            .iter()
            .zip(&self.alpha)
            .map(|(&p, &a)| a * kernel(e, p, &self.hyper))
            .sum()
    }

    /// Gradient of [`Self::predict_mean`] with respect to the query position.
    pub fn predict_mean_grad(&self, e: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&p, &a) in self.train_positions.iter().zip(&self.alpha) {
            let w = -a * kernel(e, p, &self.hyper) / self.hyper.ell;
            g[0] += w * (e[0] - p[0]);
            g[1] += w * (e[1] - p[1]);
        }
        g
    }

    /// Mean and its gradient in one pass.
    pub fn predict_with_grad(&self, e: [f64; 2]) -> (f64, [f64; 2]) {
        let mut m = 0.0;
        let mut g = [0.0; 2];
        for (&p, &a) in self.train_positions.iter().zip(&self.alpha) {
            let ak = a * kernel(e, p, &self.hyper);
            m += ak;
            let w = -ak / self.hyper.ell;
            g[0] += w * (e[0] - p[0]);
            g[1] += w * (e[1] - p[1]);
        }
        (m, g)
    }

    /// |(C + lambda I) alpha - y| / |y|.
    pub fn relative_residual(&self) -> f64 {
        let c = kernel_matrix(&self.train_positions, &self.hyper);
        let mut a = c;
        for i in 0..a.nrows() {
            a[(i, i)] += self.hyper.lambda;
        }
        let y = DVector::from_column_slice(&self.targets);
        let alpha = DVector::from_column_slice(&self.alpha);
        let r = (&y - a * alpha).norm();
        let yn = y.norm();
        if yn == 0.0 {
            r
        } else {
            r / yn
        }
    }
}

/// The three regressed fields of one zone: location, scale and zeta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneModel {
    pub zone: ZoneId,
    pub model_mu: GprModel,
    pub model_sigma: GprModel,
    pub model_zeta: GprModel,
}

/// A completed GEV fit for one zone at one training position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionFit {
    pub zone: ZoneId,
    pub position: [f64; 2],
    pub params: GevParams,
}

/// Assembles the per-zone datasets (position -> mu, sigma, zeta) and trains
/// three regressors per zone.
pub fn build_zone_models(
    fits: &[PositionFit],
    zones: &[ZoneId],
    positions: &[[f64; 2]],
    epsilon: f64,
    restarts: usize,
) -> Result<Vec<ZoneModel>> {
    let mut gaps = Vec::new();
    let mut table = Vec::with_capacity(zones.len());
    for &z in zones {
        let mut rows = Vec::with_capacity(positions.len());
        for &p in positions {
            match fits.iter().find(|f| f.zone == z && f.position == p) {
                Some(f) => rows.push(f.params),
                None => gaps.push(format!("zone {z} at ({}, {})", p[0], p[1])),
            }
        }
        table.push(rows);
    }
    if !gaps.is_empty() {
        return Err(Error::IncompleteDataset(gaps.join(", ")));
    }
    zones
        .iter()
        .zip(table)
        .map(|(&zone, rows)| {
            let mu: Vec<f64> = rows.iter().map(|p| p.mu).collect();
            let sigma: Vec<f64> = rows.iter().map(|p| p.sigma).collect();
            let zeta = rows
                .iter()
                .map(|p| zeta_transform(p.xi, epsilon))
                .collect::<Result<Vec<f64>>>()?;
            Ok(ZoneModel {
                zone,
                model_mu: GprModel::fit(positions, &mu, restarts)?,
                model_sigma: GprModel::fit(positions, &sigma, restarts)?,
                model_zeta: GprModel::fit(positions, &zeta, restarts)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn hyper(gamma: f64, ell: f64, lambda: f64) -> GprHyper {
        GprHyper { gamma, ell, lambda }
    }

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = stream(seed, Purpose::Synthetic, &[]);
        (0..n)
            .map(|_| [rng.random_range(-120.0..120.0), rng.random_range(-120.0..120.0)])
            .collect()
    }

    #[test]
    fn kernel_values() {
        let h = hyper(2.5, 400.0, 0.0);
        assert_eq!(kernel([3.0, 4.0], [3.0, 4.0], &h), 2.5);
        let d = (2.0 * 400.0 * 2f64.ln()).sqrt();
        assert!((kernel([0.0, 0.0], [d, 0.0], &h) - 1.25).abs() < 1e-14);
        let v = kernel([1.0, 2.0], [-7.0, 13.0], &h);
        assert!((v - 2.5 * (-(64.0 + 121.0) / 800.0f64).exp()).abs() < 1e-14);
        assert_eq!(v, kernel([-7.0, 13.0], [1.0, 2.0], &h));
    }

    #[test]
    fn single_point_identities() {
        let m = GprModel::train(&[[5.0, -3.0]], &[0.7], hyper(2.0, 100.0, 0.0)).unwrap();
        assert!((m.predict_mean([5.0, -3.0]) - 0.7).abs() < 1e-15);
        let m = GprModel::train(&[[5.0, -3.0]], &[0.7], hyper(2.0, 100.0, 0.5)).unwrap();
        assert!((m.predict_mean([5.0, -3.0]) - 0.7 * 2.0 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn exact_interpolation_without_regularizer() {
        let x = random_points(40, 1);
        let mut rng = stream(2, Purpose::Synthetic, &[]);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = GprModel::train(&x, &y, hyper(1.0, 300.0, 0.0)).unwrap();
        assert!(m.relative_residual() < 1e-10);
        for (p, t) in x.iter().zip(&y) {
            assert!((m.predict_mean(*p) - t).abs() < 1e-8);
        }
    }

    #[test]
    fn near_singular_systems_get_jitter() {
        // Very long lengthscale on a dense grid: C is numerically singular.
        let x: Vec<[f64; 2]> = (0..9).flat_map(|i| (0..9).map(move |j| [i as f64 * 30.0, j as f64 * 30.0])).collect();
        let y: Vec<f64> = x.iter().map(|p| (p[0] / 50.0).sin() + p[1] / 100.0).collect();
        let m = GprModel::train(&x, &y, hyper(1.0, 1e6, 0.0)).unwrap();
        assert!(m.hyper.lambda > 0.0);
        assert!(m.relative_residual() < 1e-10);
    }

    #[test]
    fn regularization_reduces_training_fit() {
        let x = random_points(30, 3);
        let y: Vec<f64> = x.iter().map(|p| (p[0] / 40.0).cos() * (p[1] / 60.0).sin()).collect();
        let err = |lambda: f64| {
            let m = GprModel::train(&x, &y, hyper(1.0, 900.0, lambda)).unwrap();
            x.iter().zip(&y).map(|(p, t)| (m.predict_mean(*p) - t).powi(2)).sum::<f64>()
        };
        let mut prev = err(0.0);
        for lambda in [1e-6, 1e-4, 1e-2, 1e-1, 1.0] {
            let e = err(lambda);
            assert!(e >= prev, "lambda={lambda}");
            prev = e;
        }
    }

    #[test]
    fn permutation_invariance() {
        let x = random_points(20, 4);
        let y: Vec<f64> = x.iter().map(|p| p[0] * 0.01 - p[1] * 0.02).collect();
        let h = hyper(1.0, 2000.0, 1e-3);
        let m1 = GprModel::train(&x, &y, h).unwrap();
        let mut idx: Vec<usize> = (0..20).collect();
        idx.reverse();
        idx.swap(3, 11);
        let xp: Vec<[f64; 2]> = idx.iter().map(|&i| x[i]).collect();
        let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let m2 = GprModel::train(&xp, &yp, h).unwrap();
        for q in random_points(10, 5) {
            assert!((m1.predict_mean(q) - m2.predict_mean(q)).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream(6, Purpose::Synthetic, &[]);
        for trial in 0..100 {
            let x = random_points(12, 100 + trial);
            let y: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ell = rng.random_range(200.0..5000.0);
            let m = GprModel::train(&x, &y, hyper(rng.random_range(0.5..2.0), ell, 1e-3)).unwrap();
            let q = [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)];
            let g = m.predict_mean_grad(q);
            let (_, g2) = m.predict_with_grad(q);
            assert_eq!(g, g2);
            let h = 1e-4;
            for k in 0..2 {
                let mut a = q;
                let mut b = q;
                a[k] += h;
                b[k] -= h;
                let fd = (m.predict_mean(a) - m.predict_mean(b)) / (2.0 * h);
                let scale = g[k].abs().max(1e-6);
                assert!((g[k] - fd).abs() / scale < 1e-6, "trial {trial}: {} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn symmetric_query_has_zero_axial_gradient() {
        let m = GprModel::train(&[[-10.0, 0.0], [10.0, 0.0]], &[1.0, 1.0], hyper(1.0, 50.0, 0.0)).unwrap();
        assert!((m.alpha[0] - m.alpha[1]).abs() < 1e-15);
        let g = m.predict_mean_grad([0.0, 7.0]);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn zone_models_report_gaps() {
        let positions = vec![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let zones = vec![ZoneId(1), ZoneId(2)];
        let p = GevParams::new(1.0, 0.1, 0.05).unwrap();
        let mut fits: Vec<PositionFit> = zones
            .iter()
            .flat_map(|&zone| positions.iter().map(move |&position| PositionFit { zone, position, params: p }))
            .collect();
        fits.remove(4);
        match build_zone_models(&fits, &zones, &positions, 1e-3, 0) {
            Err(Error::IncompleteDataset(msg)) => assert!(msg.contains("zone 2 at (10, 0)"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
