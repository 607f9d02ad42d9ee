//! Expected net present value of the double barrier strategy that pays out
//! everything above `a` and injects capital at unit cost `κ` to keep the
//! surplus at or above 0, its sensitivity to `a`, and the optimal barrier.
//!
//! In the band `[0, a]`
//!
//! ```text
//! V(x) = [W1(0, x) − κ W1(a, x)] / W12(0, a)
//! ```
//!
//! extended by `V(0) + κx` below 0 and `V(a) + x − a` above `a`.

use crate::error::{Error, Result};
use crate::root::{bisect, bracket_upcrossing};
use crate::scale::{ScaleKernel, WOrder};

/// Below this, `W12(0, a)` is treated as a backend failure.
pub const DEGENERACY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct BarrierProblem {
    kernel: ScaleKernel,
    a: f64,
    kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValues {
    pub v0: f64,
    pub va: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothFit {
    pub slope_at_zero: f64,
    pub slope_at_a: f64,
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 1.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kappa must exceed 1, got {kappa}")))
    }
}

impl BarrierProblem {
    pub fn new(kernel: ScaleKernel, a: f64, kappa: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("barrier a must be positive, got {a}")));
        }
        check_kappa(kappa)?;
        Ok(Self { kernel, a, kappa })
    }

    pub fn kernel(&self) -> &ScaleKernel {
        &self.kernel
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn q(&self) -> f64 {
        self.kernel.q()
    }

    pub fn with_barrier(&self, a: f64) -> Result<Self> {
        Self::new(self.kernel.clone(), a, self.kappa)
    }

    fn normalizer(&self) -> Result<f64> {
        let w12 = self.kernel.w12(0.0, self.a)?;
        if !(w12 >= DEGENERACY_FLOOR) {
            return Err(Error::Degenerate { a: self.a, value: w12 });
        }
        Ok(w12)
    }

    fn in_band(&self, x: f64, norm: f64) -> Result<f64> {
        Ok((self.kernel.w1(0.0, x)? - self.kappa * self.kernel.w1(self.a, x)?) / norm)
    }

    pub fn boundary_values(&self) -> Result<BoundaryValues> {
        let norm = self.normalizer()?;
        Ok(BoundaryValues {
            v0: self.in_band(0.0, norm)?,
            va: self.in_band(self.a, norm)?,
        })
    }

    pub fn value_function(&self, x: f64) -> Result<f64> {
        let norm = self.normalizer()?;
        if x < 0.0 {
            Ok(self.in_band(0.0, norm)? + self.kappa * x)
        } else if x > self.a {
            Ok(self.in_band(self.a, norm)? + x - self.a)
        } else {
            self.in_band(x, norm)
        }
    }

    /// `∂V/∂x` inside the band, `[W12(0, x) − κ W12(a, x)] / W12(0, a)`.
    pub fn value_derivative_in_band(&self, x: f64) -> Result<f64> {
        let norm = self.normalizer()?;
        Ok((self.kernel.w12(0.0, x)? - self.kappa * self.kernel.w12(self.a, x)?) / norm)
    }

    /// One-sided derivatives of the value at `0+` and `a−`.
    pub fn smooth_fit_diagnostics(&self) -> Result<SmoothFit> {
        Ok(SmoothFit {
            slope_at_zero: self.value_derivative_in_band(0.0)?,
            slope_at_a: self.value_derivative_in_band(self.a)?,
        })
    }

    /// `∂V^a(x)/∂a = −W1(0, x) ς(a) / W12(0, a)²` for `0 ≤ x ≤ a`; the value
    /// at `x = a` for `x > a`.
    pub fn value_slope_in_barrier(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("barrier sensitivity needs x >= 0, got {x}")));
        }
        let x = x.min(self.a);
        let norm = self.normalizer()?;
        let s = varsigma(&self.kernel, self.kappa, self.a)?;
        Ok(-self.kernel.w1(0.0, x)? * s / (norm * norm))
    }
}

/// `ς(a) = W122(0, a) + κ W112(a, a)`, evaluated as
/// `(2q/σ²(a)) [W1(0, a) − κ s'(a)] − (2μ(a)/σ²(a)) W12(0, a)`.
pub fn varsigma(kernel: &ScaleKernel, kappa: f64, a: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if a == 0.0 {
        return varsigma_at_zero(kernel, kappa);
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("ς needs a > 0, got {a}")));
    }
    let (k, m) = kernel.reduction_coefficients(a)?;
    Ok(k * (kernel.w1(0.0, a)? - kappa * kernel.s_prime(a)?) - m * kernel.w12(0.0, a)?)
}

/// `ς(0+) = −(κ − 1)(2q/σ²(0)) W1(0, 0)`.
pub fn varsigma_at_zero(kernel: &ScaleKernel, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let (k, _) = kernel.reduction_coefficients(0.0)?;
    Ok(-(kappa - 1.0) * k * kernel.eval(0.0, 0.0, WOrder::W1)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSearchConfig {
    pub a_max: f64,
    pub grid_growth: f64,
    pub root_tol: f64,
    pub max_iters: usize,
    pub start: f64,
}

impl Default for BarrierSearchConfig {
    fn default() -> Self {
        Self {
            a_max: 50.0,
            grid_growth: 1.5,
            root_tol: 1e-10,
            max_iters: 200,
            start: 1e-3,
        }
    }
}

impl BarrierSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_max > 0.0 && self.grid_growth > 1.0 && self.root_tol > 0.0 && self.start > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid barrier search settings: {self:?}")));
        }
        if self.start > self.a_max {
            return Err(Error::InvalidParameter(format!(
                "search start {} exceeds a_max {}",
                self.start, self.a_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalBarrier {
    pub a_star: f64,
    /// `ς(a*)`
    pub residual: f64,
    /// Final bisection bracket before refinement.
    pub bracket: (f64, f64),
}

/// The first upcrossing of zero by `ς`, bracketed on a geometric grid and
/// refined by bisection.
pub fn optimal_barrier(kernel: &ScaleKernel, kappa: f64, cfg: &BarrierSearchConfig) -> Result<OptimalBarrier> {
    cfg.validate()?;
    let f = |a: f64| varsigma(kernel, kappa, a);
    let bracket = bracket_upcrossing(f, varsigma_at_zero(kernel, kappa)?, cfg.start, cfg.grid_growth, cfg.a_max)?;
    let a_star = bisect(f, bracket, cfg.root_tol, cfg.max_iters)?;
    Ok(OptimalBarrier {
        a_star,
        residual: f(a_star)?,
        bracket: (bracket.lo, bracket.hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::closed_form_eigenpair;
    use crate::model::{make_diffusion, Family};
    use crate::scale::DerivMode;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kernel(family: Family, params: &[f64], q: f64) -> ScaleKernel {
        let spec = make_diffusion(family, params).unwrap();
        ScaleKernel::new(closed_form_eigenpair(&spec, q).unwrap(), DerivMode::Reduction)
    }

    fn bm(q: f64) -> ScaleKernel {
        kernel(Family::BrownianDrift, &[0.0, 1.0], q)
    }

    fn ou(q: f64) -> ScaleKernel {
        kernel(Family::OrnsteinUhlenbeck, &[1.0], q)
    }

    fn families(q: f64) -> Vec<ScaleKernel> {
        vec![bm(q), ou(q), kernel(Family::ShiryaevLog, &[1.0, 0.5], q)]
    }

    #[test]
    fn brownian_value() {
        let p = BarrierProblem::new(bm(0.5), 1.0, 1.2).unwrap();
        let expected = -0.2 * 0.5f64.cosh() / 1f64.sinh();
        assert_relative_eq!(p.value_function(0.5).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, -0.1919035, epsilon = 1e-7);
    }

    #[test]
    fn brownian_boundary_value_at_optimal_barrier() {
        let p = BarrierProblem::new(bm(0.5), 1.2f64.acosh(), 1.2).unwrap();
        assert_relative_eq!(p.boundary_values().unwrap().v0, -0.44f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn outer_branches() {
        for k in families(0.5) {
            let p = BarrierProblem::new(k, 1.3, 1.5).unwrap();
            let v0 = p.value_function(0.0).unwrap();
            let va = p.value_function(1.3).unwrap();
            assert_eq!(p.value_function(-0.5).unwrap(), v0 - 0.5 * 1.5);
            assert_relative_eq!(p.value_function(3.3).unwrap(), va + 2.0, max_relative = 1e-15);
            let b = p.boundary_values().unwrap();
            assert_eq!((b.v0, b.va), (v0, va));
        }
    }

    #[test]
    fn branches_are_continuous() {
        for k in families(0.5) {
            let p = BarrierProblem::new(k, 1.0, 1.5).unwrap();
            for edge in [0.0, 1.0] {
                let inside = p.value_function(edge).unwrap();
                let left = p.value_function(edge - 1e-12).unwrap();
                let right = p.value_function(edge + 1e-12).unwrap();
                assert!((inside - left).abs() < 1e-10 && (inside - right).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_values_solve_the_linear_system() {
        for k in families(0.5) {
            for a in [0.5, 1.0, 2.5] {
                let kappa = 1.4;
                let p = BarrierProblem::new(k.clone(), a, kappa).unwrap();
                let BoundaryValues { v0, va } = p.boundary_values().unwrap();
                let first = (kappa * k.w(0.0, a).unwrap() + k.w1(0.0, 0.0).unwrap() * va) / k.w1(0.0, a).unwrap();
                let second = (k.w(a, 0.0).unwrap() + k.w1(a, a).unwrap() * v0) / k.w1(a, 0.0).unwrap();
                assert_relative_eq!(first, v0, max_relative = 1e-9);
                assert_relative_eq!(second, va, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn smooth_fit_grid() {
        for q in [0.2, 1.0] {
            for k in families(q) {
                for kappa in [1.1, 1.5, 3.0] {
                    for a in [0.5, 1.0, 2.0] {
                        let fit = BarrierProblem::new(k.clone(), a, kappa).unwrap().smooth_fit_diagnostics().unwrap();
                        assert!((fit.slope_at_a - 1.0).abs() <= 1e-9);
                        assert!((fit.slope_at_zero - kappa).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn smooth_fit_matches_difference_quotients() {
        let h = 1e-4;
        for k in families(0.5) {
            let p = BarrierProblem::new(k, 1.5, 1.3).unwrap();
            let at_a = (3.0 * p.value_function(1.5).unwrap() - 4.0 * p.value_function(1.5 - h).unwrap()
                + p.value_function(1.5 - 2.0 * h).unwrap())
                / (2.0 * h);
            let at_0 = (-3.0 * p.value_function(0.0).unwrap() + 4.0 * p.value_function(h).unwrap()
                - p.value_function(2.0 * h).unwrap())
                / (2.0 * h);
            assert_relative_eq!(at_a, 1.0, max_relative = 1e-6);
            assert_relative_eq!(at_0, 1.3, max_relative = 1e-6);
        }
    }

    #[test]
    fn brownian_smooth_fit_is_symbolic() {
        let (q, kappa, a) = (0.7f64, 1.8, 1.1);
        let r = (2.0 * q).sqrt();
        let v = |x: f64| ((r * x).cosh() - kappa * (r * (a - x)).cosh()) / (r * (r * a).sinh());
        let dv = |x: f64| ((r * x).sinh() + kappa * (r * (a - x)).sinh()) / (r * a).sinh();
        assert_relative_eq!(dv(a), 1.0, max_relative = 1e-15);
        let p = BarrierProblem::new(bm(q), a, kappa).unwrap();
        for x in [0.0, 0.4, 1.1] {
            assert_relative_eq!(p.value_function(x).unwrap(), v(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn varsigma_examples() {
        let k = bm(0.5);
        for a in [0.1, 0.6, 1.0, 3.0] {
            assert_relative_eq!(varsigma(&k, 1.2, a).unwrap(), a.cosh() - 1.2, max_relative = 1e-13);
        }
        for k in families(0.5) {
            let (two_q, _) = k.reduction_coefficients(0.0).unwrap();
            let limit = varsigma_at_zero(&k, 1.5).unwrap();
            assert_relative_eq!(limit, -0.5 * two_q * k.s_prime(0.0).unwrap(), max_relative = 1e-14);
            assert!(limit < 0.0);
            assert_relative_eq!(varsigma(&k, 1.5, 1e-7).unwrap(), limit, max_relative = 1e-5);
        }
    }

    #[test]
    fn varsigma_is_eventually_positive_and_increasing() {
        for k in families(0.5) {
            let vals: Vec<f64> = [4.0, 5.0, 6.0, 7.0].iter().map(|&a| varsigma(&k, 1.5, a).unwrap()).collect();
            assert!(vals[0] > 0.0);
            assert!(vals.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn brownian_optimal_barrier() {
        let ob = optimal_barrier(&bm(0.5), 1.2, &BarrierSearchConfig::default()).unwrap();
        assert!((ob.a_star - 1.2f64.acosh()).abs() <= 1e-9);
        let mut last = 0.0;
        for kappa in [1.5, 1.2, 1.05, 1.01, 1.001] {
            let a = optimal_barrier(&bm(0.5), kappa, &BarrierSearchConfig::default()).unwrap().a_star;
            assert!(last == 0.0 || a < last);
            last = a;
        }
        assert!(last < 0.05);
    }

    #[test]
    fn ou_optimal_barrier_is_a_sign_change() {
        let k = ou(0.5);
        let ob = optimal_barrier(&k, 1.5, &BarrierSearchConfig::default()).unwrap();
        assert!(ob.a_star > 0.0 && ob.a_star < 50.0);
        assert!(ob.residual.abs() <= 1e-8);
        assert!(varsigma(&k, 1.5, ob.a_star - 1e-6).unwrap() < 0.0);
        assert!(varsigma(&k, 1.5, ob.a_star + 1e-6).unwrap() > 0.0);
    }

    #[test]
    fn search_without_sign_change_reports_last_value() {
        let cfg = BarrierSearchConfig {
            a_max: 0.1,
            ..BarrierSearchConfig::default()
        };
        match optimal_barrier(&bm(0.5), 1.2, &cfg) {
            Err(Error::NoBracket { a_max, last_value }) => {
                assert_eq!(a_max, 0.1);
                assert_relative_eq!(last_value, 0.1f64.cosh() - 1.2, max_relative = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn barrier_slope_matches_difference_quotient() {
        let h = 1e-4;
        for k in [bm(0.5), ou(0.5)] {
            for a in [0.4, 0.9, 1.7, 3.0] {
                let p = BarrierProblem::new(k.clone(), a, 1.5).unwrap();
                for x in [0.0, 0.5 * a, 0.9 * a, a + 1.0] {
                    let fd = (-p.with_barrier(a + 2.0 * h).unwrap().value_function(x).unwrap()
                        + 8.0 * p.with_barrier(a + h).unwrap().value_function(x).unwrap()
                        - 8.0 * p.with_barrier(a - h).unwrap().value_function(x).unwrap()
                        + p.with_barrier(a - 2.0 * h).unwrap().value_function(x).unwrap())
                        / (12.0 * h);
                    let slope = p.value_slope_in_barrier(x).unwrap();
                    assert_relative_eq!(slope, fd, max_relative = 1e-6, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn barrier_slope_beyond_a_and_domain() {
        let p = BarrierProblem::new(ou(0.5), 1.0, 1.5).unwrap();
        assert_eq!(p.value_slope_in_barrier(2.0).unwrap(), p.value_slope_in_barrier(1.0).unwrap());
        assert!(matches!(p.value_slope_in_barrier(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn envelope_and_unimodality() {
        let k = ou(0.5);
        let a_star = optimal_barrier(&k, 1.5, &BarrierSearchConfig::default()).unwrap().a_star;
        let best = BarrierProblem::new(k.clone(), a_star, 1.5).unwrap();
        for i in 1..=40 {
            let a = 3.0 * a_star * i as f64 / 41.0;
            let other = BarrierProblem::new(k.clone(), a, 1.5).unwrap();
            for x in [0.0, 0.5 * a_star, a_star] {
                assert!(best.value_function(x).unwrap() >= other.value_function(x).unwrap() - 1e-9);
            }
            let slope = other.value_slope_in_barrier(0.0).unwrap();
            if a < a_star - 1e-8 {
                assert!(slope > 0.0);
            } else if a > a_star + 1e-8 {
                assert!(slope < 0.0);
            }
        }
    }

    #[test]
    fn invalid_problems() {
        assert!(BarrierProblem::new(bm(0.5), 0.0, 1.5).is_err());
        assert!(BarrierProblem::new(bm(0.5), 1.0, 1.0).is_err());
        assert!(matches!(BarrierProblem::new(bm(0.5), 1.0, 0.9), Err(Error::InvalidParameter(m)) if m.contains("kappa must exceed 1")));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn slope_sign_opposes_varsigma(a in 0.05f64..4.0, frac in 0.0f64..1.0, kappa in 1.01f64..4.0) {
            for k in [bm(0.5), ou(0.5)] {
                let p = BarrierProblem::new(k.clone(), a, kappa).unwrap();
                let s = varsigma(&k, kappa, a).unwrap();
                let slope = p.value_slope_in_barrier(frac * a).unwrap();
                prop_assert!(s == 0.0 || slope.signum() == -s.signum());
            }
        }
    }
}
