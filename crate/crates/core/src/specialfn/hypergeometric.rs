use super::gamma::gamma;
use crate::error::{Error, Result};
use crate::quad::{integrate_to_infinity, QuadratureConfig};

fn is_nonpositive_integer(b: f64) -> bool {
    b <= 0.0 && b == b.floor()
}

/// Plain power series `Σ (a)_n z^n / ((b)_n n!)`, summed until the terms stop
/// changing the partial sum.
pub(crate) fn kummer_series(a: f64, b: f64, z: f64) -> Result<f64> {
    let max_terms = 1_000 + 4 * z.abs().ceil() as usize;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut n = 0usize;
    loop {
        let nf = n as f64;
        term *= (a + nf) / (b + nf) * z / (nf + 1.0);
        sum += term;
        n += 1;
        if term == 0.0 || (term.abs() <= f64::EPSILON * 0.25 * sum.abs() && nf + 1.0 > z.abs()) {
            break;
        }
        if !sum.is_finite() {
            return Err(Error::Domain(format!("M({a}, {b}, {z}) overflows")));
        }
        if n >= max_terms {
            return Err(Error::Domain(format!(
                "M({a}, {b}, {z}) series did not settle in {max_terms} terms"
            )));
        }
    }
    Ok(sum)
}

/// Kummer's transformation `M(a, b, z) = e^z M(b - a, b, -z)`.
pub(crate) fn kummer_transformed(a: f64, b: f64, z: f64) -> Result<f64> {
    Ok(z.exp() * kummer_series(b - a, b, -z)?)
}

/// Confluent hypergeometric function of the first kind, `M(a, b, z)`.
///
/// Negative arguments go through Kummer's transformation so the summed series
/// has terms of one sign when `b > a > 0`; for `z ≥ 0` the direct series
/// already has that property.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(b) {
        return Err(Error::ParameterPole(b));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z < 0.0 && !is_nonpositive_integer(a) {
        return kummer_transformed(a, b, z);
    }
    kummer_series(a, b, z)
}

/// `dM/dz = (a/b) M(a+1, b+1, z)`.
pub fn kummer_m_deriv(a: f64, b: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(b) {
        return Err(Error::ParameterPole(b));
    }
    Ok(a / b * kummer_m(a + 1.0, b + 1.0, z)?)
}

/// Confluent hypergeometric function of the second kind for `a > 0`, `z > 0`:
/// `U(a, b, z) = 1/Γ(a) ∫₀^∞ e^{-zt} t^{a-1} (1+t)^{b-a-1} dt`.
///
/// Evaluated as `z^{-a}/Γ(a) ∫₀^∞ e^{-s} s^{a-1} (1 + s/z)^{b-a-1} ds` (`t = s/z`);
/// for `a < 1` the substitution `w = s^a` removes the endpoint singularity.
pub fn tricomi_u(a: f64, b: f64, z: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("U requires a > 0, got a = {a}")));
    }
    if !(z > 0.0) {
        return Err(Error::Domain(format!("U requires z > 0, got z = {z}")));
    }
    let c = b - a - 1.0;
    let inv_z = 1.0 / z;
    let integral = if a < 1.0 {
        let inv_a = 1.0 / a;
        let f = |w: f64| {
            let s = w.powf(inv_a);
            (-s + c * (s * inv_z).ln_1p()).exp()
        };
        integrate_to_infinity(f, 0.0, 1.0, cfg)? / (a * gamma(a))
    } else {
        let f = |s: f64| {
            if s == 0.0 {
                return if a == 1.0 { 1.0 } else { 0.0 };
            }
            ((a - 1.0) * s.ln() - s + c * (s * inv_z).ln_1p()).exp()
        };
        integrate_to_infinity(f, 0.0, a.max(1.0), cfg)? / gamma(a)
    };
    Ok(z.powf(-a) * integral)
}

/// `dU/dz = -a U(a+1, b+1, z)`.
pub fn tricomi_u_deriv(a: f64, b: f64, z: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(-a * tricomi_u(a + 1.0, b + 1.0, z, cfg)?)
}
