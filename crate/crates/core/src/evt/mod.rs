//! Generalized extreme value (GEV) law: evaluation, gradients, quantiles,
//! and the shape-to-zeta map used by the closed-form payload.
//!
//! Conventions: `s = 1 + xi (t - mu) / sigma` and `L = ln(s) / xi`, so that
//! `s^(-1/xi) = exp(-L)`. `L` is evaluated with `ln_1p` or, for tiny
//! `xi * u`, its power series, which makes every function here continuous
//! through the Gumbel limit `xi = 0`.

mod fit;

pub use fit::{fit_gev, FitOptions, FitReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |xi| the Gumbel-limit series is used.
pub const XI_EPS: f64 = 1e-6;

/// Below this |xi * u| the series for `L` and `dL/dxi` replace the closed forms.
const SERIES_CUTOFF: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    /// Location, seconds.
    pub mu: f64,
    /// Scale, seconds.
    pub sigma: f64,
    /// Shape.
    pub xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        let p = Self { mu, sigma, xi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.sigma.is_finite() && self.xi.is_finite()) {
            return Err(Error::Domain(format!("non-finite GEV parameters {self:?}")));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Domain(format!("GEV scale must be positive, got {}", self.sigma)));
        }
        if !(self.xi.abs() < 5.0) {
            return Err(Error::Domain(format!("GEV shape {} outside (-5, 5)", self.xi)));
        }
        Ok(())
    }

    /// Parameters of `c * T` when `T` has these parameters (c > 0).
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mu: self.mu * c,
            sigma: self.sigma * c,
            xi: self.xi,
        }
    }

    /// Whether `t` lies where the density is positive.
    pub fn in_support(&self, t: f64) -> bool {
        1.0 + self.xi * (t - self.mu) / self.sigma > 0.0
    }
}

/// `L = ln(1 + xi u) / xi` and `dL/dxi` at fixed `u`.
#[inline]
fn log_term(u: f64, xi: f64) -> (f64, f64) {
    let w = xi * u;
    if w.abs() < SERIES_CUTOFF {
        // L = sum_k (-1)^k xi^k u^(k+1) / (k+1)
        // dL/dxi = sum_{k>=1} (-1)^k k xi^(k-1) u^(k+1) / (k+1)
        let mut l = 0.0;
        let mut d = 0.0;
        let mut prev = 1.0; // (-w)^(k-1)
        let mut wk = 1.0; // (-w)^k
        for k in 0..8 {
            let kf = k as f64;
            l += wk * u / (kf + 1.0);
            if k >= 1 {
                // (-1)^k xi^(k-1) u^(k+1) = -u^2 (-w)^(k-1)
                d -= kf * u * u * prev / (kf + 1.0);
                prev = wk;
            }
            wk *= -w;
        }
        (l, d)
    } else {
        let l = w.ln_1p() / xi;
        let s = 1.0 + w;
        (l, (u / s - l) / xi)
    }
}

#[inline]
fn support_error(t: f64) -> Error {
    Error::Support { value: t }
}

/// Pr{T > t} = 1 - exp(-s^(-1/xi)); 1 below a lower endpoint, 0 above an upper one.
pub fn gev_ccdf(t: f64, p: &GevParams) -> f64 {
    let u = (t - p.mu) / p.sigma;
    if 1.0 + p.xi * u <= 0.0 {
        return if p.xi > 0.0 { 1.0 } else { 0.0 };
    }
    let (l, _) = log_term(u, p.xi);
    -(-(-l).exp()).exp_m1()
}

/// Pr{T <= t}.
pub fn gev_cdf(t: f64, p: &GevParams) -> f64 {
    let u = (t - p.mu) / p.sigma;
    if 1.0 + p.xi * u <= 0.0 {
        return if p.xi > 0.0 { 0.0 } else { 1.0 };
    }
    let (l, _) = log_term(u, p.xi);
    (-(-l).exp()).exp()
}

/// s^(-1/xi), the tail exponent. It equals -ln CDF(t) and approximates the
/// exceedance probability when small (the `ln(1-eps) ~ -eps` reading of the
/// URLLC constraint).
pub fn gev_tail_exponent(t: f64, p: &GevParams) -> f64 {
    let u = (t - p.mu) / p.sigma;
    if 1.0 + p.xi * u <= 0.0 {
        return if p.xi > 0.0 { f64::INFINITY } else { 0.0 };
    }
    (-log_term(u, p.xi).0).exp()
}

/// ln f(t) = -ln sigma - (1 + xi) L - exp(-L).
pub fn gev_logpdf(t: f64, p: &GevParams) -> Result<f64> {
    let u = (t - p.mu) / p.sigma;
    if !(1.0 + p.xi * u > 0.0) {
        return Err(support_error(t));
    }
    let (l, _) = log_term(u, p.xi);
    Ok(-p.sigma.ln() - (1.0 + p.xi) * l - (-l).exp())
}

/// Gradient of ln f with respect to (mu, sigma, xi).
pub fn gev_loglik_grad(t: f64, p: &GevParams) -> Result<[f64; 3]> {
    let u = (t - p.mu) / p.sigma;
    let s = 1.0 + p.xi * u;
    if !(s > 0.0) {
        return Err(support_error(t));
    }
    let (l, dl) = log_term(u, p.xi);
    let e = (-l).exp();
    let ss = p.sigma * s;
    let d_mu = (1.0 + p.xi) / ss - e / ss;
    let d_sigma = -1.0 / p.sigma + u * (1.0 + p.xi) / ss - u * e / ss;
    let d_xi = -u / s - (1.0 - e) * dl;
    Ok([d_mu, d_sigma, d_xi])
}

/// t with CDF(t) = q: mu + sigma ((-ln q)^(-xi) - 1) / xi.
pub fn gev_quantile(q: f64, p: &GevParams) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let l = -(-q.ln()).ln();
    Ok(p.mu + p.sigma * expm1_over(p.xi, l))
}

/// (exp(x c) - 1) / x, continuous at x = 0.
#[inline]
fn expm1_over(x: f64, c: f64) -> f64 {
    let w = x * c;
    if w.abs() < SERIES_CUTOFF {
        c * (1.0 + w / 2.0 + w * w / 6.0 + w * w * w / 24.0)
    } else {
        w.exp_m1() / x
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// zeta = (eps^(-xi) - 1) / xi, with the limit -ln eps at xi = 0.
pub fn zeta_transform(xi: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(expm1_over(xi, -epsilon.ln()))
}

/// Inverse of [`zeta_transform`] in `xi`.
pub fn zeta_inverse(zeta: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::Domain(format!("zeta must be positive and finite, got {zeta}")));
    }
    let c = -epsilon.ln();
    let f = |x: f64| expm1_over(x, c) - zeta;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo) > 0.0 {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::Domain(format!("zeta {zeta} too small to invert")));
        }
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain(format!("zeta {zeta} too large to invert")));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(hi).abs() < f(lo).abs() { hi } else { lo })
}
