use std::f64::consts::SQRT_2;

use super::gamma::gamma;
use crate::error::{Error, Result};
use crate::quad::{integrate_to_infinity, QuadratureConfig};

/// Hermite function of negative real order through its integral representation
/// `H_v(x) = e^{x²}/Γ(-v) ∫₀^∞ s^{-v-1} e^{-(s+x)²} ds`.
///
/// The Gaussian prefactor is folded into the integrand (`e^{-s² - 2sx}`), and
/// for `-1 < v < 0` the endpoint singularity is removed with `w = s^{-v}`.
pub fn hermite_h(v: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(v < 0.0) {
        return Err(Error::OrderDomain(v));
    }
    let p = -v;
    // bulk of the integrand sits near s = max(-x, 0) with width ~ 1 / (1 + 2|x|)
    let s_scale = if x < 0.0 { -x + 1.0 } else { 1.0 / (1.0 + 2.0 * x) };
    let integral = if p < 1.0 {
        let inv_p = 1.0 / p;
        let f = |w: f64| {
            let s = w.powf(inv_p);
            (-s * s - 2.0 * s * x).exp()
        };
        integrate_to_infinity(f, 0.0, s_scale.powf(p), cfg)? / p
    } else {
        let f = |s: f64| {
            if s == 0.0 {
                return if p == 1.0 { 1.0 } else { 0.0 };
            }
            ((p - 1.0) * s.ln() - s * s - 2.0 * s * x).exp()
        };
        integrate_to_infinity(f, 0.0, s_scale, cfg)?
    };
    Ok(integral / gamma(p))
}

/// `d/dx H_v(x) = 2v H_{v-1}(x)`.
pub fn hermite_h_deriv(v: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(2.0 * v * hermite_h(v - 1.0, x, cfg)?)
}

/// Parabolic cylinder function `D_v(x) = 2^{-v/2} e^{-x²/4} H_v(x/√2)` for `v < 0`.
pub fn parabolic_d(v: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let h = hermite_h(v, x / SQRT_2, cfg)?;
    Ok((-0.5 * v * std::f64::consts::LN_2 - 0.25 * x * x).exp() * h)
}

/// `D_v'(x) = v D_{v-1}(x) - (x/2) D_v(x)`; the recurrence only lowers the order.
pub fn parabolic_d_deriv(v: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(v * parabolic_d(v - 1.0, x, cfg)? - 0.5 * x * parabolic_d(v, x, cfg)?)
}
