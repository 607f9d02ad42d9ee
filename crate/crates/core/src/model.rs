//! Regular diffusions on the real line, `dX = μ(X) dt + σ(X) dB`, and checks of
//! the standing assumptions (σ > 0, local integrability of `(1 + |μ|)/σ²`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadratureConfig};

/// A real coefficient function. Returning a non-finite value signals that the
/// coefficient is undefined at that point.
pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    BrownianDrift,
    OrnsteinUhlenbeck,
    ShiryaevLog,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::BrownianDrift => "brownian-drift",
            Family::OrnsteinUhlenbeck => "ornstein-uhlenbeck",
            Family::ShiryaevLog => "shiryaev-log",
            Family::Custom => "custom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Family::BrownianDrift, Family::OrnsteinUhlenbeck, Family::ShiryaevLog, Family::Custom]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown family {s:?} (expected brownian-drift, ornstein-uhlenbeck, shiryaev-log or custom)"
                ))
            })
    }
}

/// Drift and volatility of a one-dimensional diffusion.
#[derive(Clone)]
pub enum DiffusionSpec {
    /// `μ ≡ drift`, `σ ≡ volatility`.
    BrownianDrift { drift: f64, volatility: f64 },
    /// `μ(x) = -θx`, `σ ≡ 1`.
    OrnsteinUhlenbeck { rate: f64 },
    /// Logarithm of the Shiryaev process: `μ(x) = ν(e^{-2lx} - 1)`, `σ ≡ 1`.
    ShiryaevLog { nu: f64, l: f64 },
    Custom {
        drift: Coefficient,
        volatility: Coefficient,
    },
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BrownianDrift { drift, volatility } => f
                .debug_struct("BrownianDrift")
                .field("drift", drift)
                .field("volatility", volatility)
                .finish(),
            Self::OrnsteinUhlenbeck { rate } => {
                f.debug_struct("OrnsteinUhlenbeck").field("rate", rate).finish()
            }
            Self::ShiryaevLog { nu, l } => f
                .debug_struct("ShiryaevLog")
                .field("nu", nu)
                .field("l", l)
                .finish(),
            Self::Custom { .. } => f.write_str("Custom { .. }"),
        }
    }
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

/// Builds a parametric diffusion. Parameter order: BrownianDrift `[μ₀, σ₀]`,
/// OrnsteinUhlenbeck `[θ]`, ShiryaevLog `[ν, l]`. Custom diffusions carry
/// callables and are built with [`DiffusionSpec::custom`].
pub fn make_diffusion(family: Family, params: &[f64]) -> Result<DiffusionSpec> {
    let expect = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{family} takes {n} parameter(s), got {}",
                params.len()
            )))
        }
    };
    match family {
        Family::BrownianDrift => {
            expect(2)?;
            if !params[0].is_finite() {
                return Err(Error::InvalidParameter(format!("drift must be finite, got {}", params[0])));
            }
            Ok(DiffusionSpec::BrownianDrift {
                drift: params[0],
                volatility: positive("volatility σ₀", params[1])?,
            })
        }
        Family::OrnsteinUhlenbeck => {
            expect(1)?;
            Ok(DiffusionSpec::OrnsteinUhlenbeck {
                rate: positive("rate θ", params[0])?,
            })
        }
        Family::ShiryaevLog => {
            expect(2)?;
            Ok(DiffusionSpec::ShiryaevLog {
                nu: positive("ν", params[0])?,
                l: positive("l", params[1])?,
            })
        }
        Family::Custom => Err(Error::InvalidParameter(
            "custom diffusions are built from coefficient callables, not parameters".into(),
        )),
    }
}

impl DiffusionSpec {
    pub fn custom<M, S>(drift: M, volatility: S) -> Self
    where
        M: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        DiffusionSpec::Custom {
            drift: Arc::new(drift),
            volatility: Arc::new(volatility),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::BrownianDrift { .. } => Family::BrownianDrift,
            Self::OrnsteinUhlenbeck { .. } => Family::OrnsteinUhlenbeck,
            Self::ShiryaevLog { .. } => Family::ShiryaevLog,
            Self::Custom { .. } => Family::Custom,
        }
    }

    /// Family parameters in [`make_diffusion`] order; empty for Custom.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::BrownianDrift { drift, volatility } => vec![drift, volatility],
            Self::OrnsteinUhlenbeck { rate } => vec![rate],
            Self::ShiryaevLog { nu, l } => vec![nu, l],
            Self::Custom { .. } => Vec::new(),
        }
    }

    /// `(μ(x), σ(x))` without domain checks. Custom callables may return NaN here.
    #[inline]
    pub fn coefficients_raw(&self, x: f64) -> (f64, f64) {
        match self {
            Self::BrownianDrift { drift, volatility } => (*drift, *volatility),
            Self::OrnsteinUhlenbeck { rate } => (-rate * x, 1.0),
            Self::ShiryaevLog { nu, l } => (nu * ((-2.0 * l * x).exp() - 1.0), 1.0),
            Self::Custom { drift, volatility } => (drift(x), volatility(x)),
        }
    }

    /// `(μ(x), σ(x))`.
    pub fn coefficients(&self, x: f64) -> Result<(f64, f64)> {
        let (mu, sigma) = self.coefficients_raw(x);
        if !mu.is_finite() {
            return Err(Error::CoefficientDomain { x, what: "drift" });
        }
        if !sigma.is_finite() {
            return Err(Error::CoefficientDomain { x, what: "volatility" });
        }
        Ok((mu, sigma))
    }

    /// `(μ(x), σ(x))`, additionally rejecting `σ(x) ≤ 0`.
    pub(crate) fn nondegenerate_coefficients(&self, x: f64) -> Result<(f64, f64)> {
        let (mu, sigma) = self.coefficients(x)?;
        if sigma <= 0.0 {
            return Err(Error::AssumptionViolation(format!(
                "volatility σ({x}) = {sigma} is not positive"
            )));
        }
        Ok((mu, sigma))
    }

    /// `μ'(x)`: analytic for the parametric families, central difference with
    /// step `1e-5` for Custom.
    pub fn drift_derivative(&self, x: f64) -> Result<f64> {
        match self {
            Self::BrownianDrift { .. } => Ok(0.0),
            Self::OrnsteinUhlenbeck { rate } => Ok(-rate),
            Self::ShiryaevLog { nu, l } => Ok(-2.0 * l * nu * (-2.0 * l * x).exp()),
            Self::Custom { .. } => {
                const H: f64 = 1e-5;
                let (up, _) = self.coefficients(x + H)?;
                let (down, _) = self.coefficients(x - H)?;
                Ok((up - down) / (2.0 * H))
            }
        }
    }

    /// The volatility when it is constant by construction.
    pub fn constant_volatility(&self) -> Option<f64> {
        match self {
            Self::BrownianDrift { volatility, .. } => Some(*volatility),
            Self::OrnsteinUhlenbeck { .. } | Self::ShiryaevLog { .. } => Some(1.0),
            Self::Custom { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub positivity_ok: bool,
    pub local_integrability_ok: bool,
    /// `μ ≤ 0` and `μ' < q` at every grid point in `[0, ∞)`.
    pub p2_precondition_ok: bool,
    /// σ takes a single value over the grid; the optimal-barrier
    /// characterization is only certified when this holds as well.
    pub constant_volatility: bool,
    pub grid: Vec<f64>,
    pub messages: Vec<String>,
}

impl ValidationReport {
    /// Whether an optimal barrier computed for this diffusion is certified.
    pub fn certifies_optimal_barrier(&self) -> bool {
        self.positivity_ok
            && self.local_integrability_ok
            && self.p2_precondition_ok
            && self.constant_volatility
    }
}

const INTEGRABILITY_TOL: f64 = 1e-8;

/// Checks the standing assumptions on an evenly spaced grid over
/// `[x_lo, x_hi]`. Findings are reported, never thrown.
pub fn validate(spec: &DiffusionSpec, q: f64, x_lo: f64, x_hi: f64, n_grid: usize) -> ValidationReport {
    let mut messages = Vec::new();
    if !(q > 0.0) || !(x_lo < x_hi) || n_grid < 3 {
        messages.push(format!(
            "invalid validation request: q = {q}, range [{x_lo}, {x_hi}], n_grid = {n_grid}"
        ));
        return ValidationReport {
            positivity_ok: false,
            local_integrability_ok: false,
            p2_precondition_ok: false,
            constant_volatility: false,
            grid: Vec::new(),
            messages,
        };
    }
    let step = (x_hi - x_lo) / (n_grid - 1) as f64;
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| if i + 1 == n_grid { x_hi } else { x_lo + step * i as f64 })
        .collect();

    let mut positivity_ok = true;
    let mut sigmas = Vec::with_capacity(grid.len());
    for &x in &grid {
        match spec.coefficients(x) {
            Ok((_, sigma)) if sigma > 0.0 => sigmas.push(sigma),
            Ok((_, sigma)) => {
                positivity_ok = false;
                messages.push(format!("σ({x}) = {sigma} violates non-degeneracy"));
            }
            Err(e) => {
                positivity_ok = false;
                messages.push(e.to_string());
            }
        }
    }

    let constant_volatility = match spec.constant_volatility() {
        Some(_) => positivity_ok,
        None => {
            positivity_ok
                && sigmas
                    .iter()
                    .all(|s| (s - sigmas[0]).abs() <= 1e-12 * sigmas[0].abs())
        }
    };
    if positivity_ok && !constant_volatility {
        messages.push("σ is not constant on the grid; optimal-barrier results are uncertified".into());
    }

    let mut local_integrability_ok = positivity_ok;
    if positivity_ok {
        let cfg = QuadratureConfig::with_tolerances(INTEGRABILITY_TOL, INTEGRABILITY_TOL);
        for w in grid.windows(2) {
            let integrand = |s: f64| {
                let (mu, sigma) = spec.coefficients_raw(s);
                (1.0 + mu.abs()) / (sigma * sigma)
            };
            match integrate(integrand, w[0], w[1], &cfg) {
                Ok(v) if v.is_finite() => {}
                Ok(v) => {
                    local_integrability_ok = false;
                    messages.push(format!("∫(1+|μ|)/σ² over [{}, {}] = {v}", w[0], w[1]));
                }
                Err(e) => {
                    local_integrability_ok = false;
                    messages.push(format!("local integrability on [{}, {}]: {e}", w[0], w[1]));
                }
            }
        }
    }

    let mut p2_precondition_ok = true;
    let mut checked = 0usize;
    for &x in grid.iter().filter(|&&x| x >= 0.0) {
        checked += 1;
        match (spec.coefficients(x), spec.drift_derivative(x)) {
            (Ok((mu, _)), Ok(dmu)) => {
                if mu > 0.0 {
                    p2_precondition_ok = false;
                    messages.push(format!("μ({x}) = {mu} > 0"));
                }
                if dmu >= q {
                    p2_precondition_ok = false;
                    messages.push(format!("μ'({x}) = {dmu} ≥ q = {q}"));
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                p2_precondition_ok = false;
                messages.push(e.to_string());
            }
        }
    }
    if checked == 0 {
        p2_precondition_ok = false;
        messages.push("grid has no points in [0, ∞); optimal-barrier precondition unchecked".into());
    }

    ValidationReport {
        positivity_ok,
        local_integrability_ok,
        p2_precondition_ok,
        constant_volatility,
        grid,
        messages,
    }
}

/// Checks the optimal-barrier preconditions on `[0, a_max]` (201 grid points).
pub fn validate_for_barrier(spec: &DiffusionSpec, q: f64, a_max: f64) -> ValidationReport {
    validate(spec, q, 0.0, a_max, 201)
}
