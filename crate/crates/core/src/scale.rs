//! The bivariate q-scale function
//! `W(x, y) = [φ⁺(x)φ⁻(y) − φ⁻(x)φ⁺(y)] / c_q`
//! and its partial derivatives. Superscript 1 differentiates the first
//! argument and 2 the second, so `W12(u, z) = ∂_u ∂_z W(u, z)`.
//!
//! Second derivatives never use numerical differentiation. Each fundamental
//! solution satisfies `φ'' = (2qφ − 2μφ')/σ²`, which gives
//!
//! ```text
//! W11(u, z)  =  (2q/σ²(u)) W(u, z)  − (2μ(u)/σ²(u)) W1(u, z)
//! W122(u, z) =  (2q/σ²(z)) W1(u, z) − (2μ(z)/σ²(z)) W12(u, z)
//! W112(u, z) = −(2q/σ²(u)) W1(z, u) − (2μ(u)/σ²(u)) W12(u, z)
//! ```

use std::fmt;
use std::str::FromStr;

use crate::eigen::{eigenpair, Backend, EigenPair, OdeConfig};
use crate::error::{Error, Result};
use crate::model::DiffusionSpec;
use crate::ode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivMode {
    /// Product form of the fundamental pair throughout.
    Reduction,
    /// Product form, falling back to integrating the equation along the second
    /// argument whenever the product form cancels badly.
    DirectOde,
}

impl FromStr for DerivMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduction" => Ok(DerivMode::Reduction),
            "direct-ode" => Ok(DerivMode::DirectOde),
            other => Err(Error::InvalidParameter(format!(
                "unknown derivative mode {other:?} (expected reduction or direct-ode)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WOrder {
    W,
    W1,
    W11,
    W12,
    W122,
    W112,
}

impl fmt::Display for WOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WOrder::W => "W",
            WOrder::W1 => "W1",
            WOrder::W11 => "W11",
            WOrder::W12 => "W12",
            WOrder::W122 => "W122",
            WOrder::W112 => "W112",
        })
    }
}

/// Discounted two-sided exit transforms from `y` out of `(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitFunctionals {
    /// `E_y[e^{−qτ_z}; τ_z < τ_x]`
    pub up: f64,
    /// `E_y[e^{−qτ_x}; τ_x < τ_z]`
    pub down: f64,
}

/// Relative cancellation level above which [`DerivMode::DirectOde`] switches
/// to row integration.
pub const CANCELLATION_THRESHOLD: f64 = 1e-6;

// rows exist to recover digits, so they never run looser than this
const ROW_REL_TOL: f64 = 1e-13;
const ROW_ABS_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct ScaleKernel {
    pair: EigenPair,
    mode: DerivMode,
    ode: OdeConfig,
}

impl ScaleKernel {
    pub fn new(pair: EigenPair, mode: DerivMode) -> Self {
        Self::with_ode_config(pair, mode, OdeConfig::default())
    }

    /// `ode` sets the step bound of the row integrations and may tighten
    /// their tolerances.
    pub fn with_ode_config(pair: EigenPair, mode: DerivMode, ode: OdeConfig) -> Self {
        Self { pair, mode, ode }
    }

    /// Builds the pair with `backend` (closed form falling back to the ODE
    /// backend where no closed form exists) and wraps it.
    pub fn build(spec: &DiffusionSpec, q: f64, backend: Backend, mode: DerivMode, ode: &OdeConfig) -> Result<Self> {
        Ok(Self::with_ode_config(eigenpair(spec, q, backend, ode)?, mode, *ode))
    }

    pub fn pair(&self) -> &EigenPair {
        &self.pair
    }

    pub fn q(&self) -> f64 {
        self.pair.q()
    }

    pub fn mode(&self) -> DerivMode {
        self.mode
    }

    pub fn spec(&self) -> &DiffusionSpec {
        self.pair.spec()
    }

    pub fn s_prime(&self, x: f64) -> Result<f64> {
        self.pair.s_prime(x)
    }

    /// `(2q/σ²(x), 2μ(x)/σ²(x))`.
    pub fn reduction_coefficients(&self, x: f64) -> Result<(f64, f64)> {
        let (mu, sigma) = self.pair.spec().nondegenerate_coefficients(x)?;
        let inv = 2.0 / (sigma * sigma);
        Ok((inv * self.q(), inv * mu))
    }

    /// Product form of W, W1 or W12 with the two terms kept apart so the
    /// caller can judge cancellation.
    fn product_terms(&self, x: f64, y: f64, order: WOrder) -> Result<(f64, f64)> {
        let ex = self.pair.eval(x)?;
        let ey = self.pair.eval(y)?;
        let c = self.pair.c_q();
        Ok(match order {
            WOrder::W => (ex.plus * ey.minus / c, ex.minus * ey.plus / c),
            WOrder::W1 => (ex.plus_deriv * ey.minus / c, ex.minus_deriv * ey.plus / c),
            WOrder::W12 => (ex.plus_deriv * ey.minus_deriv / c, ex.minus_deriv * ey.plus_deriv / c),
            _ => unreachable!("only first-order product forms are assembled directly"),
        })
    }

    fn primary(&self, x: f64, y: f64, order: WOrder) -> Result<f64> {
        if x == y {
            match order {
                WOrder::W | WOrder::W12 => return Ok(0.0),
                WOrder::W1 => return self.s_prime(x),
                _ => {}
            }
        }
        let (a, b) = self.product_terms(x, y, order)?;
        let value = a - b;
        if self.mode == DerivMode::DirectOde {
            let cancellation = self.pair.relative_accuracy() * (a.abs() + b.abs()) / value.abs();
            if !(cancellation <= CANCELLATION_THRESHOLD) {
                let (w, dw) = self.row_point(x, y, order)?;
                return Ok(if order == WOrder::W12 { dw } else { w });
            }
        }
        Ok(value)
    }

    /// Evaluates `W` or one of its partial derivatives at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64, order: WOrder) -> Result<f64> {
        match order {
            WOrder::W | WOrder::W1 | WOrder::W12 => self.primary(x, y, order),
            WOrder::W11 => {
                let (k, m) = self.reduction_coefficients(x)?;
                Ok(k * self.primary(x, y, WOrder::W)? - m * self.primary(x, y, WOrder::W1)?)
            }
            WOrder::W122 => {
                let (k, m) = self.reduction_coefficients(y)?;
                Ok(k * self.primary(x, y, WOrder::W1)? - m * self.primary(x, y, WOrder::W12)?)
            }
            WOrder::W112 => {
                let (k, m) = self.reduction_coefficients(x)?;
                let cross = if x == y { self.s_prime(x)? } else { self.primary(y, x, WOrder::W1)? };
                Ok(-k * cross - m * self.primary(x, y, WOrder::W12)?)
            }
        }
    }

    pub fn w(&self, x: f64, y: f64) -> Result<f64> {
        self.eval(x, y, WOrder::W)
    }

    pub fn w1(&self, x: f64, y: f64) -> Result<f64> {
        self.eval(x, y, WOrder::W1)
    }

    pub fn w12(&self, x: f64, y: f64) -> Result<f64> {
        self.eval(x, y, WOrder::W12)
    }

    /// `up = W(y, x)/W(z, x)` and `down = W(z, y)/W(z, x)` for `x < y < z`.
    pub fn exit_functionals(&self, x: f64, y: f64, z: f64) -> Result<ExitFunctionals> {
        if !(x < y && y < z) {
            return Err(Error::Ordering { x, y, z });
        }
        let denom = self.w(z, x)?;
        Ok(ExitFunctionals {
            up: self.w(y, x)? / denom,
            down: self.w(z, y)? / denom,
        })
    }

    fn row_control(&self) -> ode::StepControl {
        ode::StepControl {
            rel_tol: self.ode.rel_tol.min(ROW_REL_TOL),
            abs_tol: self.ode.abs_tol.min(ROW_ABS_TOL),
            max_step: self.ode.max_step,
            ..ode::StepControl::default()
        }
    }

    fn row_rhs(&self) -> impl Fn(f64, &[f64; 2]) -> Result<[f64; 2]> + '_ {
        move |y: f64, s: &[f64; 2]| {
            let (k, m) = self.reduction_coefficients(y)?;
            Ok([s[1], k * s[0] - m * s[1]])
        }
    }

    fn row_initial(&self, x: f64, order: WOrder) -> Result<[f64; 2]> {
        let sp = self.s_prime(x)?;
        match order {
            WOrder::W => Ok([0.0, -sp]),
            WOrder::W1 | WOrder::W12 => Ok([sp, 0.0]),
            other => Err(Error::InvalidParameter(format!("no row integration for order {other}"))),
        }
    }

    /// `(W(x, y), ∂_y W(x, y))` for order W, `(W1(x, y), W12(x, y))` for W1
    /// and W12, by integrating in `y` from the diagonal.
    fn row_point(&self, x: f64, y: f64, order: WOrder) -> Result<(f64, f64)> {
        let init = self.row_initial(x, order)?;
        let ctl = self.row_control();
        let s = ode::integrate(&self.row_rhs(), x, init, y, None, &ctl, |_, _| {})?;
        Ok((s[0], s[1]))
    }

    /// `y ↦ W(x, y)` (order W) or `y ↦ W1(x, y)` (order W1) at each target,
    /// integrated along `y` from the diagonal. Targets must be sorted
    /// ascending and may lie on both sides of `x`.
    pub fn stabilized_row(&self, x: f64, targets: &[f64], order: WOrder) -> Result<Vec<f64>> {
        if self.mode != DerivMode::DirectOde {
            return Err(Error::InvalidParameter(
                "row integration requires the direct-ode derivative mode".into(),
            ));
        }
        if !matches!(order, WOrder::W | WOrder::W1) {
            return Err(Error::InvalidParameter(format!("no row integration for order {order}")));
        }
        if targets.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidParameter("row targets must be sorted ascending".into()));
        }
        let init = self.row_initial(x, order)?;
        let ctl = self.row_control();
        let rhs = self.row_rhs();
        let split = targets.partition_point(|&t| t < x);
        let mut out = vec![0.0; targets.len()];

        let mut walk = |indices: &mut dyn Iterator<Item = usize>| -> Result<()> {
            let (mut at, mut state) = (x, init);
            for i in indices {
                let t = targets[i];
                state = ode::integrate(&rhs, at, state, t, None, &ctl, |_, _| {})?;
                at = t;
                out[i] = state[0];
            }
            Ok(())
        };
        walk(&mut (0..split).rev())?;
        walk(&mut (split..targets.len()))?;
        Ok(out)
    }
}
