//! FSO and RF link rates, plus the concave lower bounds used by the planner.
//!
//! Every public rate is in bits per second. The FSO rate is
//! `(B/2)·log2(1 + k1·e^{−k2 d})` and the RF rate is `B·log2(1 + γ0/z^α)` with
//! `z` the squared relay-destination distance.

use std::f64::consts::{E, LN_2, PI};

use thiserror::Error;

use crate::scenario::{DerivedConstants, ScenarioParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("no root of the APR equation for apr = {apr} (residual {residual:.3e})")]
    NoRoot { apr: f64, residual: f64 },
    #[error("apr = {0} is outside (0, 1) or equal to 0.5")]
    BadApr(f64),
}

/// Kim-model size-distribution exponent for a visibility in km.
pub fn kim_coefficient(visibility_km: f64) -> f64 {
    let v = visibility_km;
    if v > 50.0 {
        1.6
    } else if v > 6.0 {
        1.3
    } else if v > 1.0 {
        0.16 * v + 0.34
    } else if v > 0.5 {
        v - 0.5
    } else {
        0.0
    }
}

/// Beer-Lambert attenuation coefficient in 1/m.
pub fn attenuation_per_m(visibility_km: f64, wavelength_nm: f64) -> f64 {
    let p = kim_coefficient(visibility_km);
    let beta_db_per_km = 3.91 / visibility_km * (wavelength_nm / 550.0).powf(-p);
    beta_db_per_km * std::f64::consts::LN_10 / 1e4
}

pub fn fso_gain(dist_m: f64, beta_per_m: f64) -> f64 {
    (-beta_per_m * dist_m).exp()
}

fn apr_residual(apr: f64, mu: f64) -> f64 {
    // e^{-μ}/(1-e^{-μ}) = 1/(e^μ - 1)
    apr - (1.0 / mu - 1.0 / mu.exp_m1())
}

/// Solves `α0 = 1/μ − e^{−μ}/(1 − e^{−μ})` for `μ`.
pub fn solve_mu_star(apr: f64) -> Result<f64, ChannelError> {
    if !(apr > 0.0 && apr < 0.5) {
        return Err(ChannelError::BadApr(apr));
    }
    // the right-hand side falls monotonically from ½ (μ→0) to 0 (μ→∞)
    let (mut lo, mut hi) = (1e-9_f64, 1e4_f64);
    if apr_residual(apr, lo) > 0.0 || apr_residual(apr, hi) < 0.0 {
        return Err(ChannelError::NoRoot { apr, residual: apr_residual(apr, lo) });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if apr_residual(apr, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let mu = if apr_residual(apr, lo).abs() < apr_residual(apr, hi).abs() { lo } else { hi };
    let residual = apr_residual(apr, mu);
    if residual.abs() > 1e-12 {
        return Err(ChannelError::NoRoot { apr, residual });
    }
    Ok(mu)
}

/// ASNR-dependent rate constant `k1`.
pub fn fso_k1(asnr_linear: f64, apr: f64) -> Result<f64, ChannelError> {
    if !(apr > 0.0 && apr < 1.0) || apr == 0.5 {
        return Err(ChannelError::BadApr(apr));
    }
    if apr < 0.5 {
        let mu = solve_mu_star(apr)?;
        let shape = (1.0 - (-mu).exp()) / mu;
        Ok((2.0 * apr * mu).exp() / (2.0 * PI * E) * shape * shape * asnr_linear / (apr * apr))
    } else {
        Ok(asnr_linear / (2.0 * PI * E * apr * apr))
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn dist3_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsoLinkModel {
    pub beta_per_m: f64,
    pub k1: f64,
    pub k2: f64,
    pub bandwidth_hz: f64,
    pub asnr_linear: f64,
    pub apr: f64,
    pub mu_star: Option<f64>,
}

impl FsoLinkModel {
    pub fn new(p: &ScenarioParams, d: &DerivedConstants) -> Self {
        Self {
            beta_per_m: d.beta_per_m,
            k1: d.k1,
            k2: d.k2,
            bandwidth_hz: p.fso_bandwidth_hz,
            asnr_linear: d.asnr_linear,
            apr: p.apr,
            mu_star: d.mu_star,
        }
    }

    /// Rate at a relay-source distance `d` in meters.
    pub fn rate_at(&self, d: f64) -> f64 {
        0.5 * self.bandwidth_hz * (self.k1 * (-self.k2 * d).exp()).ln_1p() / LN_2
    }

    /// High-SNR form `(B/(2 ln2))·(ln k1 − k2 d)`; negative far from the source.
    pub fn surrogate_at(&self, d: f64) -> f64 {
        0.5 * self.bandwidth_hz / LN_2 * (self.k1.ln() - self.k2 * d)
    }

    /// Tangent of `rate_at` at `d_ref`, as `(intercept, slope)` in bps and bps/m,
    /// so the bound reads `intercept + slope·d`. `rate_at` is convex in `d`, so
    /// the tangent lies below it everywhere.
    pub fn tangent_at(&self, d_ref: f64) -> (f64, f64) {
        let c = 0.5 * self.bandwidth_hz / LN_2;
        let x = self.k1 * (-self.k2 * d_ref).exp();
        let f = x.ln_1p();
        let fp = -self.k2 * x / (1.0 + x);
        (c * (f - fp * d_ref), c * fp)
    }

    pub fn rate(&self, uav: [f64; 3], src: [f64; 3]) -> f64 {
        self.rate_at(dist3(uav, src))
    }

    pub fn surrogate(&self, uav: [f64; 3], src: [f64; 3]) -> f64 {
        self.surrogate_at(dist3(uav, src))
    }
}

pub fn fso_rate(model: &FsoLinkModel, uav: [f64; 3], src: [f64; 3]) -> f64 {
    model.rate(uav, src)
}

pub fn fso_rate_surrogate(model: &FsoLinkModel, uav: [f64; 3], src: [f64; 3]) -> f64 {
    model.surrogate(uav, src)
}

/// Probability of a LoS link at elevation `theta_deg`, before NLoS mixing.
pub fn los_logistic(theta_deg: f64, c: f64, d: f64) -> f64 {
    1.0 / (1.0 + c * (-d * (theta_deg - c)).exp())
}

/// LoS probability of the relay-destination link.
pub fn los_probability(uav: [f64; 3], dst: [f64; 3], altitude: f64, c: f64, d: f64) -> f64 {
    let l = dist3(uav, dst);
    let theta = (altitude / l).clamp(-1.0, 1.0).asin().to_degrees();
    los_logistic(theta, c, d)
}

/// `P + (1 − P)κ` at a fixed elevation.
pub fn los_probability_at_angle(theta_deg: f64, c: f64, d: f64, kappa: f64) -> f64 {
    let p = los_logistic(theta_deg, c, d);
    p + (1.0 - p) * kappa
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfLinkModel {
    pub gamma0: f64,
    pub alpha: f64,
    pub bandwidth_hz: f64,
    pub los_c: f64,
    pub los_d: f64,
    pub nlos_atten: f64,
    pub los_prob_bar: f64,
}

impl RfLinkModel {
    pub fn new(p: &ScenarioParams, d: &DerivedConstants) -> Self {
        Self {
            gamma0: d.gamma0,
            alpha: p.pathloss_exp_half,
            bandwidth_hz: p.rf_bandwidth_hz,
            los_c: p.los_c,
            los_d: p.los_d,
            nlos_atten: p.nlos_atten,
            los_prob_bar: d.los_prob_bar,
        }
    }

    /// Rate at squared relay-destination distance `z` in m².
    pub fn rate_at_sq(&self, z: f64) -> f64 {
        self.bandwidth_hz * (self.gamma0 / z.powf(self.alpha)).ln_1p() / LN_2
    }

    /// `(A^k, B^k)` at squared distance `z_k`; the bound is
    /// `B_RF·(A^k − B^k·(z − z_k))`.
    pub fn linearization_at_sq(&self, z_k: f64) -> (f64, f64) {
        let za = z_k.powf(self.alpha);
        let a = (self.gamma0 / za).ln_1p() / LN_2;
        let b = self.gamma0 * self.alpha / (LN_2 * (self.gamma0 + za) * z_k);
        (a, b)
    }

    pub fn rate(&self, uav: [f64; 3], dst: [f64; 3]) -> f64 {
        self.rate_at_sq(dist3_sq(uav, dst))
    }

    pub fn linearized(&self, uav: [f64; 3], expansion: [f64; 3], dst: [f64; 3]) -> f64 {
        let z_k = dist3_sq(expansion, dst);
        let (a, b) = self.linearization_at_sq(z_k);
        self.bandwidth_hz * (a - b * (dist3_sq(uav, dst) - z_k))
    }
}

pub fn rf_rate(model: &RfLinkModel, uav: [f64; 3], dst: [f64; 3]) -> f64 {
    model.rate(uav, dst)
}

pub fn rf_rate_linearized(model: &RfLinkModel, uav: [f64; 3], expansion: [f64; 3], dst: [f64; 3]) -> f64 {
    model.linearized(uav, expansion, dst)
}

/// Both link models for a scenario.
pub fn link_models(p: &ScenarioParams) -> Result<(FsoLinkModel, RfLinkModel), ChannelError> {
    let d = p.derived()?;
    Ok((FsoLinkModel::new(p, &d), RfLinkModel::new(p, &d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_touches_at_reference() {
        let m = FsoLinkModel {
            beta_per_m: 8e-4,
            k1: 40.0,
            k2: 1.6e-3,
            bandwidth_hz: 1e8,
            asnr_linear: 1.0,
            apr: 0.1,
            mu_star: None,
        };
        for d in [100.0, 900.0, 2500.0] {
            let (c0, c1) = m.tangent_at(d);
            assert!((c0 + c1 * d - m.rate_at(d)).abs() < 1e-6);
            assert!(c0 + c1 * (d + 300.0) <= m.rate_at(d + 300.0));
        }
    }

    #[test]
    fn residual_uses_stable_form() {
        let mu = 30.0_f64;
        let naive = 1.0 / mu - (-mu).exp() / (1.0 - (-mu).exp());
        assert!((apr_residual(0.0, mu) + naive).abs() < 1e-15);
    }
}
