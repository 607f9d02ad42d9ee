//! Monte Carlo oracle for the double barrier strategy and for two-sided exit
//! transforms.
//!
//! Paths follow the Euler–Maruyama scheme. For the controlled process every
//! step is projected back onto `[0, a]`: the overshoot above `a` is paid as a
//! dividend and the undershoot below 0 is injected, both discounted at the
//! step's left endpoint. Path `i` draws its normals from the counter-based
//! stream keyed by `(seed, i)` (or `(seed, i/2)` with `Z` negated for odd `i`
//! under antithetic sampling), so results do not depend on how paths are
//! spread over threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DiffusionSpec;
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Largest admissible `e^{−q·horizon}`.
    pub max_discount_at_horizon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 40.0,
            n_paths: 200_000,
            seed: 20_240_501,
            antithetic: false,
            max_discount_at_horizon: 1e-8,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, q: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.dt < self.horizon) {
            return Err(Error::Config(format!(
                "need 0 < dt < horizon (dt {}, horizon {})",
                self.dt, self.horizon
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "antithetic sampling needs an even n_paths, got {}",
                self.n_paths
            )));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Config(format!("discount rate q must be positive, got {q}")));
        }
        let tail = (-q * self.horizon).exp();
        if !(tail <= self.max_discount_at_horizon) {
            return Err(Error::Config(format!(
                "e^(-q*horizon) = {tail:e} exceeds the truncation bound {:e}; lengthen the horizon",
                self.max_discount_at_horizon
            )));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn stream(&self, path_index: u64) -> (u64, f64) {
        if self.antithetic {
            (path_index / 2, if path_index.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (path_index, 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathResult {
    pub pv_dividends: f64,
    pub pv_injections: f64,
    pub total_dividends: f64,
    pub total_injections: f64,
    /// Alternations between dividend and injection regulation.
    pub switches: u64,
    pub final_state: f64,
    /// Sum of the unprojected Euler increments.
    pub increment_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Crude bound on the value left out by stopping at the horizon.
    pub truncation_bound: f64,
}

trait Coefficients: Sync {
    fn at(&self, x: f64) -> (f64, f64);
}

struct Brownian {
    drift: f64,
    volatility: f64,
}

impl Coefficients for Brownian {
    #[inline(always)]
    fn at(&self, _x: f64) -> (f64, f64) {
        (self.drift, self.volatility)
    }
}

struct Ou {
    rate: f64,
}

impl Coefficients for Ou {
    #[inline(always)]
    fn at(&self, x: f64) -> (f64, f64) {
        (-self.rate * x, 1.0)
    }
}

struct ShiryaevLog {
    nu: f64,
    l: f64,
}

impl Coefficients for ShiryaevLog {
    #[inline(always)]
    fn at(&self, x: f64) -> (f64, f64) {
        (self.nu * ((-2.0 * self.l * x).exp() - 1.0), 1.0)
    }
}

struct Dynamic<'a>(&'a DiffusionSpec);

impl Coefficients for Dynamic<'_> {
    #[inline]
    fn at(&self, x: f64) -> (f64, f64) {
        self.0.coefficients_raw(x)
    }
}

/// Runs `body` with the family's coefficients as a concrete type so the
/// inner loops are specialised.
macro_rules! with_coefficients {
    ($spec:expr, $c:ident => $body:expr) => {
        match *$spec {
            DiffusionSpec::BrownianDrift { drift, volatility } => {
                let $c = Brownian { drift, volatility };
                $body
            }
            DiffusionSpec::OrnsteinUhlenbeck { rate } => {
                let $c = Ou { rate };
                $body
            }
            DiffusionSpec::ShiryaevLog { nu, l } => {
                let $c = ShiryaevLog { nu, l };
                $body
            }
            DiffusionSpec::Custom { .. } => {
                let $c = Dynamic($spec);
                $body
            }
        }
    };
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    None,
    Dividend,
    Injection,
}

#[derive(Clone, Copy)]
struct Stepper {
    dt: f64,
    sqrt_dt: f64,
    step_discount: f64,
    n_steps: usize,
}

impl Stepper {
    fn new(cfg: &SimConfig, q: f64) -> Self {
        Self {
            dt: cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            step_discount: (-q * cfg.dt).exp(),
            n_steps: cfg.n_steps(),
        }
    }
}

/// State of one controlled path between steps.
struct Regulated {
    r: PathResult,
    phase: Phase,
    u: f64,
}

impl Regulated {
    #[inline(always)]
    fn start(a: f64, x0: f64) -> Self {
        let mut s = Self { r: PathResult::default(), phase: Phase::None, u: x0 };
        if x0 > a {
            s.r.pv_dividends = x0 - a;
            s.r.total_dividends = x0 - a;
            s.phase = Phase::Dividend;
            s.u = a;
        }
        s
    }

    /// Applies one Euler step driven by the scaled normal `dw` and returns
    /// the regulation `(dividend, injection)` it triggered.
    #[inline(always)]
    fn step<C: Coefficients>(&mut self, c: &C, dt: f64, a: f64, dw: f64, discount: f64) -> (f64, f64) {
        let (mu, sigma) = c.at(self.u);
        let inc = mu * dt + sigma * dw;
        self.r.increment_sum += inc;
        self.u += inc;
        if self.u > a {
            let div = self.u - a;
            self.r.pv_dividends += discount * div;
            self.r.total_dividends += div;
            if self.phase == Phase::Injection {
                self.r.switches += 1;
            }
            self.phase = Phase::Dividend;
            self.u = a;
            (div, 0.0)
        } else if self.u < 0.0 {
            let inj = -self.u;
            self.r.pv_injections += discount * inj;
            self.r.total_injections += inj;
            if self.phase == Phase::Dividend {
                self.r.switches += 1;
            }
            self.phase = Phase::Injection;
            self.u = 0.0;
            (0.0, inj)
        } else {
            (0.0, 0.0)
        }
    }

    fn finish(mut self) -> PathResult {
        self.r.final_state = self.u;
        self.r
    }
}

/// One controlled path. `observe(state, dividend, injection)` sees every
/// projected state with that step's regulation amounts.
#[inline(always)]
fn controlled_path<C: Coefficients, O: FnMut(f64, f64, f64)>(
    c: &C,
    st: Stepper,
    a: f64,
    x0: f64,
    rng: &mut CounterRng,
    sign: f64,
    mut observe: O,
) -> PathResult {
    let mut path = Regulated::start(a, x0);
    let mut discount = 1.0;
    let noise = sign * st.sqrt_dt;
    for _ in 0..st.n_steps {
        let z: f64 = rng.sample(StandardNormal);
        let (div, inj) = path.step(c, st.dt, a, noise * z, discount);
        observe(path.u, div, inj);
        discount *= st.step_discount;
    }
    path.finish()
}

/// An antithetic pair driven by one stream; identical to two calls of
/// [`controlled_path`] with opposite signs, at half the sampling cost.
#[inline(always)]
fn controlled_pair<C: Coefficients>(c: &C, st: Stepper, a: f64, x0: f64, rng: &mut CounterRng) -> (PathResult, PathResult) {
    let mut plus = Regulated::start(a, x0);
    let mut minus = Regulated::start(a, x0);
    let mut discount = 1.0;
    let mut block = [0.0; NORMAL_BLOCK];
    let mut remaining = st.n_steps;
    while remaining > 0 {
        let len = remaining.min(NORMAL_BLOCK);
        fill_normals(rng, &mut block[..len]);
        for &z in &block[..len] {
            let dw = st.sqrt_dt * z;
            plus.step(c, st.dt, a, dw, discount);
            minus.step(c, st.dt, a, -dw, discount);
            discount *= st.step_discount;
        }
        remaining -= len;
    }
    (plus.finish(), minus.finish())
}

const NORMAL_BLOCK: usize = 512;

/// Draws normals in stream order; kept out of line so the sampler inlines
/// into a tight loop.
#[inline(never)]
fn fill_normals(rng: &mut CounterRng, out: &mut [f64]) {
    for z in out {
        *z = rng.sample(StandardNormal);
    }
}

fn check_controlled(a: f64, x0: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("barrier a must be positive, got {a}")));
    }
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "simulation starts must be non-negative, got {x0}; values below 0 follow V(0) + κx"
        )));
    }
    Ok(())
}

fn finite_path(r: PathResult) -> Result<PathResult> {
    if r.pv_dividends.is_finite() && r.pv_injections.is_finite() && r.final_state.is_finite() {
        Ok(r)
    } else {
        Err(Error::CoefficientDomain {
            x: f64::NAN,
            what: "drift or volatility along a simulated path",
        })
    }
}

/// Simulates path `path_index` of the controlled process started at `x0`.
pub fn simulate_path(spec: &DiffusionSpec, a: f64, x0: f64, q: f64, cfg: &SimConfig, path_index: u64) -> Result<PathResult> {
    simulate_path_with(spec, a, x0, q, cfg, path_index, |_, _, _| {})
}

/// [`simulate_path`] with an observer called after every step.
pub fn simulate_path_with<O: FnMut(f64, f64, f64)>(
    spec: &DiffusionSpec,
    a: f64,
    x0: f64,
    q: f64,
    cfg: &SimConfig,
    path_index: u64,
    observe: O,
) -> Result<PathResult> {
    cfg.validate(q)?;
    check_controlled(a, x0)?;
    let st = Stepper::new(cfg, q);
    let (stream, sign) = cfg.stream(path_index);
    let mut rng = CounterRng::new(cfg.seed, stream);
    let r = with_coefficients!(spec, c => controlled_path(&c, st, a, x0, &mut rng, sign, observe));
    finite_path(r)
}

/// All `cfg.n_paths` controlled paths, in path order.
pub fn simulate_paths(spec: &DiffusionSpec, a: f64, x0: f64, q: f64, cfg: &SimConfig) -> Result<Vec<PathResult>> {
    cfg.validate(q)?;
    check_controlled(a, x0)?;
    let st = Stepper::new(cfg, q);
    with_coefficients!(spec, c => (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let (stream, sign) = cfg.stream(i);
            let mut rng = CounterRng::new(cfg.seed, stream);
            finite_path(controlled_path(&c, st, a, x0, &mut rng, sign, |_, _, _| {}))
        })
        .collect())
}

/// Sum by recursive halving; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (l, r) = xs.split_at(xs.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

/// Mean and standard error of independent sampling units.
fn summarize(units: &[f64], n_paths: usize, truncation_bound: f64) -> McEstimate {
    let n = units.len() as f64;
    let mean = pairwise_sum(units) / n;
    let dev: Vec<f64> = units.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if units.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_paths,
        truncation_bound,
    }
}

/// Evaluates `unit(stream)` for every sampling unit (a path, or an
/// antithetic pair) in stream order.
fn units<T, F>(cfg: &SimConfig, unit: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let n_units = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths } as u64;
    #[allow(clippy::redundant_closure)] // `unit` itself is not Send
    (0..n_units).into_par_iter().map(|i| unit(i)).collect()
}

/// Estimates `E[∫e^{−qt}dD − κ∫e^{−qt}dR]` from `x0`.
pub fn estimate_value(spec: &DiffusionSpec, a: f64, x0: f64, q: f64, kappa: f64, cfg: &SimConfig) -> Result<McEstimate> {
    cfg.validate(q)?;
    check_controlled(a, x0)?;
    if !(kappa > 1.0) {
        return Err(Error::InvalidParameter(format!("kappa must exceed 1, got {kappa}")));
    }
    let st = Stepper::new(cfg, q);
    let antithetic = cfg.antithetic;
    let values = with_coefficients!(spec, c => units(cfg, |stream| {
        let mut rng = CounterRng::new(cfg.seed, stream);
        if antithetic {
            let (p, m) = controlled_pair(&c, st, a, x0, &mut rng);
            let (p, m) = (finite_path(p)?, finite_path(m)?);
            Ok(0.5 * ((p.pv_dividends - kappa * p.pv_injections) + (m.pv_dividends - kappa * m.pv_injections)))
        } else {
            let p = finite_path(controlled_path(&c, st, a, x0, &mut rng, 1.0, |_, _, _| {}))?;
            Ok(p.pv_dividends - kappa * p.pv_injections)
        }
    }))?;
    let tail = (-q * cfg.horizon).exp() * (a + kappa * a);
    Ok(summarize(&values, cfg.n_paths, tail))
}

/// Exit status of one uncontrolled path.
#[derive(Clone, Copy)]
struct Exiting {
    u: f64,
    up: f64,
    down: f64,
    done: bool,
}

impl Exiting {
    /// Advances by one step and records `e^{−qτ}` at the step endpoint when
    /// the path leaves `(x, z)`.
    #[inline(always)]
    fn step<C: Coefficients>(&mut self, c: &C, dt: f64, dw: f64, discount: f64, x: f64, z: f64) {
        let (mu, sigma) = c.at(self.u);
        self.u += mu * dt + sigma * dw;
        if self.u >= z {
            self.up = discount;
            self.done = true;
        } else if self.u <= x {
            self.down = discount;
            self.done = true;
        } else if !self.u.is_finite() {
            self.up = f64::NAN;
            self.down = f64::NAN;
            self.done = true;
        }
    }
}

/// `(e^{−qτ}1{exit at z}, e^{−qτ}1{exit at x})` for the path from `y`
/// driven by `rng`, and for its mirror image when `pair` is set.
#[inline(always)]
fn exit_unit<C: Coefficients>(c: &C, st: Stepper, x: f64, y: f64, z: f64, rng: &mut CounterRng, pair: bool) -> (f64, f64) {
    let fresh = Exiting { u: y, up: 0.0, down: 0.0, done: false };
    let (mut plus, mut minus) = (fresh, Exiting { done: !pair, ..fresh });
    let mut discount = 1.0;
    for _ in 0..st.n_steps {
        if plus.done && minus.done {
            break;
        }
        let dw = st.sqrt_dt * rng.sample::<f64, _>(StandardNormal);
        discount *= st.step_discount;
        if !plus.done {
            plus.step(c, st.dt, dw, discount, x, z);
        }
        if !minus.done {
            minus.step(c, st.dt, -dw, discount, x, z);
        }
    }
    if pair {
        (0.5 * (plus.up + minus.up), 0.5 * (plus.down + minus.down))
    } else {
        (plus.up, plus.down)
    }
}

/// Estimates the up- and down-exit transforms of `(x, z)` from `y`.
pub fn estimate_exit(spec: &DiffusionSpec, q: f64, x: f64, y: f64, z: f64, cfg: &SimConfig) -> Result<(McEstimate, McEstimate)> {
    cfg.validate(q)?;
    if !(x < y && y < z) {
        return Err(Error::Ordering { x, y, z });
    }
    let st = Stepper::new(cfg, q);
    let antithetic = cfg.antithetic;
    let pairs = with_coefficients!(spec, c => units(cfg, |stream| {
        let mut rng = CounterRng::new(cfg.seed, stream);
        let (up, down) = exit_unit(&c, st, x, y, z, &mut rng, antithetic);
        if up.is_finite() && down.is_finite() {
            Ok((up, down))
        } else {
            Err(Error::CoefficientDomain { x: f64::NAN, what: "drift or volatility along a simulated path" })
        }
    }))?;
    let tail = (-q * cfg.horizon).exp();
    let ups: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let downs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok((summarize(&ups, cfg.n_paths, tail), summarize(&downs, cfg.n_paths, tail)))
}
