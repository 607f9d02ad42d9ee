//! Fundamental solutions of `½σ²f'' + μf' − qf = 0`, the scale density
//! `s'(x) = exp(−∫₀ˣ 2μ/σ²)` and the Wronskian constant
//! `c_q = (φ⁺'φ⁻ − φ⁻'φ⁺)/s'`.
//!
//! Two backends exist. The closed form covers driftless Brownian motion,
//! Ornstein–Uhlenbeck (Hermite functions) and the logarithm of the Shiryaev
//! process (Kummer and Tricomi functions); its pair is the canonical
//! increasing/decreasing one. The ODE backend integrates any two independent
//! solutions from a base point. Every bivariate scale quantity built from a
//! pair is invariant under a change of basis with positive determinant, so the
//! ODE pair need not be canonical.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::DiffusionSpec;
use crate::ode::{self, StepControl};
use crate::quad::{integrate, QuadratureConfig};
use crate::specialfn::{gamma, hermite_h, kummer_m, tricomi_u};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    ClosedForm,
    OdeIvp,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::ClosedForm => "closed-form",
            Backend::OdeIvp => "ode-ivp",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(Backend::ClosedForm),
            "ode-ivp" => Ok(Backend::OdeIvp),
            other => Err(Error::InvalidParameter(format!(
                "unknown backend {other:?} (expected closed-form or ode-ivp)"
            ))),
        }
    }
}

/// Values and first derivatives of the two solutions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenValues {
    pub plus: f64,
    pub minus: f64,
    pub plus_deriv: f64,
    pub minus_deriv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub base_point: f64,
    /// Range tabulated at construction. Points outside it are still
    /// evaluated, by integrating onward from the nearest end.
    pub domain: (f64, f64),
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.25,
            base_point: 0.0,
            domain: (-10.0, 10.0),
        }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ODE tolerances and max_step must be positive: {self:?}"
            )));
        }
        let (lo, hi) = self.domain;
        if !(lo <= self.base_point && self.base_point <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ODE domain {:?} must be finite and contain the base point {}",
                self.domain, self.base_point
            )));
        }
        Ok(())
    }

    fn step_control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            ..StepControl::default()
        }
    }
}

/// Initial data `(value, derivative)` at the base point for the two IVP
/// solutions. The orientation `plus.1·minus.0 − minus.1·plus.0` must be
/// positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvpBasis {
    pub plus: (f64, f64),
    pub minus: (f64, f64),
}

impl Default for IvpBasis {
    fn default() -> Self {
        Self {
            plus: (0.0, 1.0),
            minus: (1.0, 0.0),
        }
    }
}

impl IvpBasis {
    fn orientation(&self) -> f64 {
        self.plus.1 * self.minus.0 - self.minus.1 * self.plus.0
    }
}

/// Quadrature tolerances used by the closed-form special functions.
pub fn closed_form_quadrature() -> QuadratureConfig {
    QuadratureConfig::with_tolerances(1e-15, 1e-13)
}

#[derive(Clone)]
enum Repr {
    Brownian {
        r: f64,
    },
    OrnsteinUhlenbeck {
        v: f64,
        sqrt_theta: f64,
        norm: f64,
        quad: QuadratureConfig,
    },
    ShiryaevLog {
        alpha: f64,
        a: f64,
        b: f64,
        nu: f64,
        l: f64,
        quad: QuadratureConfig,
    },
    Numeric(Arc<NumericTable>),
}

/// A fundamental pair bound to one diffusion and one discount rate.
#[derive(Clone)]
pub struct EigenPair {
    spec: DiffusionSpec,
    q: f64,
    backend: Backend,
    c_q: f64,
    accuracy: f64,
    repr: Repr,
}

impl fmt::Debug for EigenPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenPair")
            .field("spec", &self.spec)
            .field("q", &self.q)
            .field("backend", &self.backend)
            .field("c_q", &self.c_q)
            .finish()
    }
}

fn check_rate(q: f64) -> Result<()> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("discount rate q must be positive, got {q}")))
    }
}

/// `exp(−∫₀ˣ 2μ/σ²)`: analytic for the named families, quadrature for Custom.
pub fn scale_density(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    match *spec {
        DiffusionSpec::BrownianDrift { drift, volatility } => {
            Ok((-2.0 * drift * x / (volatility * volatility)).exp())
        }
        DiffusionSpec::OrnsteinUhlenbeck { rate } => Ok((rate * x * x).exp()),
        DiffusionSpec::ShiryaevLog { nu, l } => {
            Ok((2.0 * nu * x + (nu / l) * (-2.0 * l * x).exp_m1()).exp())
        }
        DiffusionSpec::Custom { .. } => {
            if x == 0.0 {
                return Ok(1.0);
            }
            let cfg = QuadratureConfig::with_tolerances(1e-14, 1e-12);
            let failure = RefCell::new(None);
            let integral = integrate(
                |u| match spec.nondegenerate_coefficients(u) {
                    Ok((mu, sigma)) => 2.0 * mu / (sigma * sigma),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                },
                0.0,
                x,
                &cfg,
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok((-integral?).exp())
        }
    }
}

/// The analytic pair for driftless Brownian motion, Ornstein–Uhlenbeck and
/// the logarithm of the Shiryaev process.
pub fn closed_form_eigenpair(spec: &DiffusionSpec, q: f64) -> Result<EigenPair> {
    closed_form_eigenpair_with(spec, q, &closed_form_quadrature())
}

pub fn closed_form_eigenpair_with(spec: &DiffusionSpec, q: f64, quad: &QuadratureConfig) -> Result<EigenPair> {
    check_rate(q)?;
    quad.validate()?;
    let (repr, c_q) = match *spec {
        DiffusionSpec::BrownianDrift { drift, volatility } => {
            if drift != 0.0 {
                return Err(Error::UnsupportedFamily(
                    "Brownian motion with nonzero drift has no closed-form pair here; use the ODE backend".into(),
                ));
            }
            let r = (2.0 * q).sqrt() / volatility;
            (Repr::Brownian { r }, 2.0 * r)
        }
        DiffusionSpec::OrnsteinUhlenbeck { rate } => {
            let v = -q / rate;
            let c_q = 2.0 * (rate * std::f64::consts::PI).sqrt() / gamma(q / rate);
            if !(c_q > 0.0 && c_q.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "q/θ = {} is outside the range of the Gamma function",
                    q / rate
                )));
            }
            (
                Repr::OrnsteinUhlenbeck {
                    v,
                    sqrt_theta: rate.sqrt(),
                    norm: (-0.5 * v * std::f64::consts::LN_2).exp(),
                    quad: *quad,
                },
                c_q,
            )
        }
        DiffusionSpec::ShiryaevLog { nu, l } => {
            let r = (nu * nu + 2.0 * q).sqrt();
            let repr = Repr::ShiryaevLog {
                alpha: nu - r,
                a: (r - nu) / (2.0 * l),
                b: (r + l) / l,
                nu,
                l,
                quad: *quad,
            };
            let at0 = eval_closed(&repr, 0.0)?;
            (repr, at0.plus_deriv * at0.minus - at0.minus_deriv * at0.plus)
        }
        DiffusionSpec::Custom { .. } => {
            return Err(Error::UnsupportedFamily(
                "custom diffusions have no closed-form pair; use the ODE backend".into(),
            ))
        }
    };
    let accuracy = match repr {
        Repr::Brownian { .. } => 4.0 * f64::EPSILON,
        _ => quad.rel_tol,
    };
    Ok(EigenPair {
        spec: spec.clone(),
        q,
        backend: Backend::ClosedForm,
        c_q,
        accuracy,
        repr,
    })
}

fn eval_closed(repr: &Repr, x: f64) -> Result<EigenValues> {
    let out = match *repr {
        Repr::Brownian { r } => {
            let up = (r * x).exp();
            let down = (-r * x).exp();
            EigenValues {
                plus: up,
                minus: down,
                plus_deriv: r * up,
                minus_deriv: -r * down,
            }
        }
        // φ⁺(x) = 2^{-v/2} H_v(−√θ x), φ⁻(x) = 2^{-v/2} H_v(√θ x), H_v' = 2v H_{v−1}
        Repr::OrnsteinUhlenbeck {
            v,
            sqrt_theta,
            norm,
            ref quad,
        } => {
            let s = sqrt_theta * x;
            let dnorm = norm * 2.0 * v * sqrt_theta;
            EigenValues {
                plus: norm * hermite_h(v, -s, quad)?,
                minus: norm * hermite_h(v, s, quad)?,
                plus_deriv: -dnorm * hermite_h(v - 1.0, -s, quad)?,
                minus_deriv: dnorm * hermite_h(v - 1.0, s, quad)?,
            }
        }
        // φ⁺ = e^{αx} U(A, B, z), φ⁻ = e^{αx} M(A, B, z), z = (ν/l) e^{−2lx}
        Repr::ShiryaevLog {
            alpha,
            a,
            b,
            nu,
            l,
            ref quad,
        } => {
            let z = (nu / l) * (-2.0 * l * x).exp();
            let e = (alpha * x).exp();
            let m = kummer_m(a, b, z)?;
            let u = tricomi_u(a, b, z, quad)?;
            let m_up = kummer_m(a + 1.0, b + 1.0, z)?;
            let u_up = tricomi_u(a + 1.0, b + 1.0, z, quad)?;
            EigenValues {
                plus: e * u,
                minus: e * m,
                plus_deriv: e * (alpha * u + 2.0 * l * z * a * u_up),
                minus_deriv: e * (alpha * m - 2.0 * l * z * (a / b) * m_up),
            }
        }
        Repr::Numeric(_) => unreachable!("numeric tables are evaluated by their own path"),
    };
    if [out.plus, out.minus, out.plus_deriv, out.minus_deriv]
        .iter()
        .all(|v| v.is_finite())
    {
        Ok(out)
    } else {
        Err(Error::Domain(format!("eigenfunctions overflow at x = {x}")))
    }
}

/// Frozen table of accepted integration nodes. Evaluation re-steps from the
/// nearest node.
struct NumericTable {
    nodes: Vec<f64>,
    states: Vec<[f64; 4]>,
    rhs: Rhs,
    ctl: StepControl,
}

#[derive(Clone)]
struct Rhs {
    spec: DiffusionSpec,
    q: f64,
}

impl Rhs {
    fn eval(&self, x: f64, y: &[f64; 4]) -> Result<[f64; 4]> {
        let (mu, sigma) = self.spec.nondegenerate_coefficients(x)?;
        let inv = 2.0 / (sigma * sigma);
        Ok([
            y[1],
            inv * (self.q * y[0] - mu * y[1]),
            y[3],
            inv * (self.q * y[2] - mu * y[3]),
        ])
    }
}

impl NumericTable {
    fn build(spec: &DiffusionSpec, q: f64, cfg: &OdeConfig, basis: &IvpBasis) -> Result<Self> {
        let rhs = Rhs { spec: spec.clone(), q };
        let ctl = cfg.step_control();
        let f = |x: f64, y: &[f64; 4]| rhs.eval(x, y);
        let y0 = [basis.plus.0, basis.plus.1, basis.minus.0, basis.minus.1];
        let base = cfg.base_point;

        // an explosive region ends the table early; points beyond it fail on evaluation
        let tabulate = |end: f64| -> Result<Vec<(f64, [f64; 4])>> {
            let mut out = Vec::new();
            match ode::integrate(&f, base, y0, end, None, &ctl, |x, y| out.push((x, *y))) {
                Ok(_) | Err(Error::IntegrationFailure { .. }) => Ok(out),
                Err(e) => Err(e),
            }
        };
        let left = tabulate(cfg.domain.0)?;
        let right = tabulate(cfg.domain.1)?;

        let mut nodes = Vec::with_capacity(left.len() + right.len() + 1);
        let mut states = Vec::with_capacity(nodes.capacity());
        for (x, y) in left.into_iter().rev() {
            nodes.push(x);
            states.push(y);
        }
        nodes.push(base);
        states.push(y0);
        for (x, y) in right {
            nodes.push(x);
            states.push(y);
        }
        Ok(Self { nodes, states, rhs, ctl })
    }

    fn eval(&self, x: f64) -> Result<EigenValues> {
        let idx = match self.nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(i) => {
                let y = self.states[i];
                return Ok(EigenValues {
                    plus: y[0],
                    plus_deriv: y[1],
                    minus: y[2],
                    minus_deriv: y[3],
                });
            }
            Err(i) => i,
        };
        let nearest = if idx == 0 {
            0
        } else if idx == self.nodes.len() || x - self.nodes[idx - 1] <= self.nodes[idx] - x {
            idx - 1
        } else {
            idx
        };
        let from = self.nodes[nearest];
        let f = |t: f64, y: &[f64; 4]| self.rhs.eval(t, y);
        let y = ode::integrate(&f, from, self.states[nearest], x, Some((x - from).abs()), &self.ctl, |_, _| {})?;
        Ok(EigenValues {
            plus: y[0],
            plus_deriv: y[1],
            minus: y[2],
            minus_deriv: y[3],
        })
    }
}

/// Integrates two independent solutions from the base point with the default
/// basis `(f, f') = (0, 1)` and `(g, g') = (1, 0)`.
pub fn numeric_eigenpair(spec: &DiffusionSpec, q: f64, cfg: &OdeConfig) -> Result<EigenPair> {
    numeric_eigenpair_with_basis(spec, q, cfg, &IvpBasis::default())
}

pub fn numeric_eigenpair_with_basis(
    spec: &DiffusionSpec,
    q: f64,
    cfg: &OdeConfig,
    basis: &IvpBasis,
) -> Result<EigenPair> {
    check_rate(q)?;
    cfg.validate()?;
    let orientation = basis.orientation();
    if !(orientation > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "IVP basis must have positive orientation, got {orientation}"
        )));
    }
    let table = NumericTable::build(spec, q, cfg, basis)?;
    let c_q = orientation / scale_density(spec, cfg.base_point)?;
    Ok(EigenPair {
        spec: spec.clone(),
        q,
        backend: Backend::OdeIvp,
        c_q,
        accuracy: cfg.rel_tol,
        repr: Repr::Numeric(Arc::new(table)),
    })
}

/// Closed form when available, the ODE backend otherwise.
pub fn eigenpair(spec: &DiffusionSpec, q: f64, backend: Backend, cfg: &OdeConfig) -> Result<EigenPair> {
    match backend {
        Backend::OdeIvp => numeric_eigenpair(spec, q, cfg),
        Backend::ClosedForm => match closed_form_eigenpair(spec, q) {
            Err(Error::UnsupportedFamily(_)) => numeric_eigenpair(spec, q, cfg),
            other => other,
        },
    }
}

impl EigenPair {
    pub fn eval(&self, x: f64) -> Result<EigenValues> {
        match &self.repr {
            Repr::Numeric(table) => table.eval(x),
            repr => eval_closed(repr, x),
        }
    }

    pub fn s_prime(&self, x: f64) -> Result<f64> {
        scale_density(&self.spec, x)
    }

    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Nominal relative accuracy of a single evaluation.
    pub fn relative_accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    /// `(φ⁺'φ⁻ − φ⁻'φ⁺)/s'` at `x`; equals `c_q` for an exact pair.
    pub fn wronskian_ratio(&self, x: f64) -> Result<f64> {
        let e = self.eval(x)?;
        Ok((e.plus_deriv * e.minus - e.minus_deriv * e.plus) / self.s_prime(x)?)
    }
}
