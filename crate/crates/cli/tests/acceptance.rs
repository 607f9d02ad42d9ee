//! Acceptance suite. Each test is one criterion and prints a single
//! `criterion N: PASS|FAIL` line with the measured margin and runtime.
//!
//! The Monte Carlo criteria dominate the wall time; run with
//! `cargo test -p scalekernel-cli --test acceptance -- --nocapture` to see
//! every line.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use scalekernel::eigen::{closed_form_eigenpair, numeric_eigenpair, numeric_eigenpair_with_basis, IvpBasis};
use scalekernel::mc::{estimate_exit, estimate_value};
use scalekernel::quad::{integrate, QuadratureConfig};
use scalekernel::valuation::{optimal_barrier, varsigma};
use scalekernel::{
    make_diffusion, BarrierProblem, BarrierSearchConfig, DerivMode, DiffusionSpec, Family, OdeConfig, ScaleKernel,
    SimConfig, WOrder,
};

fn report(n: u32, what: &str, pass: bool, detail: String, elapsed: Duration, limit: Duration) {
    let in_time = elapsed <= limit;
    let verdict = if pass && in_time { "PASS" } else { "FAIL" };
    eprintln!(
        "criterion {n}: {verdict} {what}: {detail}; {:.1} s (limit {} s{})",
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    assert!(pass, "criterion {n} ({what}) failed: {detail}");
    assert!(in_time, "criterion {n} ({what}) exceeded its {} s budget", limit.as_secs());
}

fn spec(family: Family, params: &[f64]) -> DiffusionSpec {
    make_diffusion(family, params).unwrap()
}

fn closed(family: Family, params: &[f64], q: f64) -> ScaleKernel {
    ScaleKernel::new(closed_form_eigenpair(&spec(family, params), q).unwrap(), DerivMode::DirectOde)
}

fn numeric(family: Family, params: &[f64], q: f64) -> ScaleKernel {
    ScaleKernel::new(
        numeric_eigenpair(&spec(family, params), q, &OdeConfig::default()).unwrap(),
        DerivMode::DirectOde,
    )
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

const BM: (Family, &[f64]) = (Family::BrownianDrift, &[0.0, 1.0]);
const OU: (Family, &[f64]) = (Family::OrnsteinUhlenbeck, &[1.0]);
const SH: (Family, &[f64]) = (Family::ShiryaevLog, &[1.0, 0.5]);

#[test]
fn criterion_01_brownian_numeric_kernel_is_sinh() {
    let t = Instant::now();
    let k = numeric(BM.0, BM.1, 0.5);
    let pts = grid(-3.0, 3.0, 61);
    let mut worst = 0.0f64;
    for &x in &pts {
        for &y in &pts {
            worst = worst.max((k.w(x, y).unwrap() - (x - y).sinh()).abs());
        }
    }
    report(
        1,
        "numeric W(x,y) = sinh(x-y) on [-3,3]^2",
        worst <= 1e-8,
        format!("max abs error {worst:.2e} (tol 1e-8, 61x61 grid)"),
        t.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_02_ou_backends_agree() {
    let t = Instant::now();
    let ou = spec(OU.0, OU.1);
    let pts = grid(-2.0, 2.0, 41);
    let mut worst = 0.0f64;
    for q in [0.2, 0.5, 2.0] {
        let a = ScaleKernel::new(closed_form_eigenpair(&ou, q).unwrap(), DerivMode::DirectOde);
        let b = ScaleKernel::new(numeric_eigenpair(&ou, q, &OdeConfig::default()).unwrap(), DerivMode::DirectOde);
        let mut pairs: Vec<(f64, f64)> = pts
            .iter()
            .flat_map(|&x| pts.iter().map(move |&y| (x, y)))
            .filter(|(x, y)| (x - y).abs() >= 1e-3)
            .collect();
        // the closest admissible pairs
        pairs.extend(pts.iter().filter(|&&x| x + 1e-3 <= 2.0).map(|&x| (x, x + 1e-3)));
        pairs.extend(pts.iter().filter(|&&x| x - 1e-3 >= -2.0).map(|&x| (x, x - 1e-3)));
        for (x, y) in pairs {
            for order in [WOrder::W, WOrder::W1, WOrder::W12] {
                worst = worst.max(rel(b.eval(x, y, order).unwrap(), a.eval(x, y, order).unwrap()));
            }
        }
    }
    report(
        2,
        "OU closed form vs ODE on W, W1, W12",
        worst <= 1e-6,
        format!("max relative gap {worst:.2e} (tol 1e-6, q in 0.2/0.5/2)"),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_03_value_matches_monte_carlo() {
    let t = Instant::now();
    // antithetic pairs share their normal draws, which keeps the run on budget
    let cfg = SimConfig {
        dt: 1e-4,
        horizon: 40.0,
        n_paths: 200_000,
        seed: 20_240_501,
        antithetic: true,
        max_discount_at_horizon: 1e-8,
    };
    let mut pass = true;
    let mut details = Vec::new();
    for ((family, params), kappa, name) in [(BM, 1.2, "BM"), (OU, 1.5, "OU")] {
        let s = spec(family, params);
        let exact = BarrierProblem::new(closed(family, params, 0.5), 1.0, kappa).unwrap().value_function(0.5).unwrap();
        let est = estimate_value(&s, 1.0, 0.5, 0.5, kappa, &cfg).unwrap();
        let z = (est.mean - exact) / est.std_error;
        let se_share = est.std_error / exact.abs();
        pass &= z.abs() <= 3.0 && se_share <= 0.01;
        details.push(format!(
            "{name} V={exact:.6} mc={:.6} se={:.2e} z={z:.2} se/|V|={:.2}%",
            est.mean,
            est.std_error,
            100.0 * se_share
        ));
    }
    report(
        3,
        "closed-form value within 3 SE of Monte Carlo",
        pass,
        details.join("; "),
        t.elapsed(),
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_04_exit_transform_matches_monte_carlo() {
    let t = Instant::now();
    let cfg = SimConfig {
        dt: 1e-5,
        horizon: 40.0,
        n_paths: 20_000,
        seed: 7,
        antithetic: true,
        max_discount_at_horizon: 1e-8,
    };
    let mut pass = true;
    let mut details = Vec::new();
    for ((family, params), name) in [(BM, "BM"), (OU, "OU")] {
        let exact = closed(family, params, 0.5).exit_functionals(0.0, 1.0, 2.0).unwrap();
        if name == "BM" {
            assert!((exact.up - 1f64.sinh() / 2f64.sinh()).abs() < 1e-14);
        }
        let (up, down) = estimate_exit(&spec(family, params), 0.5, 0.0, 1.0, 2.0, &cfg).unwrap();
        let z_up = (up.mean - exact.up) / up.std_error;
        let z_down = (down.mean - exact.down) / down.std_error;
        pass &= z_up.abs() <= 3.0;
        details.push(format!(
            "{name} up={:.6} mc={:.6} z={z_up:.2} (down z={z_down:.2})",
            exact.up, up.mean
        ));
    }
    report(
        4,
        "up-exit transform within 3 SE of Monte Carlo",
        pass,
        details.join("; "),
        t.elapsed(),
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_05_smooth_fit() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for q in [0.2, 1.0] {
        for (family, params) in [BM, OU, SH] {
            let k = closed(family, params, q);
            for kappa in [1.1, 1.5, 3.0] {
                for a in [0.5, 1.0, 2.0] {
                    let fit = BarrierProblem::new(k.clone(), a, kappa).unwrap().smooth_fit_diagnostics().unwrap();
                    worst = worst.max((fit.slope_at_a - 1.0).abs()).max((fit.slope_at_zero - kappa).abs());
                }
            }
        }
    }
    report(
        5,
        "smooth fit V'(a-)=1, V'(0+)=kappa",
        worst <= 1e-9,
        format!("max deviation {worst:.2e} (tol 1e-9, 3 families x 3 kappa x 2 q)"),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_06_optimal_barrier() {
    let t = Instant::now();
    let cfg = BarrierSearchConfig::default();
    let bm = optimal_barrier(&closed(BM.0, BM.1, 0.5), 1.2, &cfg).unwrap();
    let bm_err = (bm.a_star - 1.2f64.acosh()).abs();
    let mut pass = bm_err <= 1e-9;
    let mut details = vec![format!("BM |a*-arccosh(1.2)|={bm_err:.2e}")];
    for ((family, params), name) in [(OU, "OU"), (SH, "ShiryaevLog")] {
        let k = closed(family, params, 0.5);
        let opt = optimal_barrier(&k, 1.5, &cfg).unwrap();
        let d = 1e-6 * opt.a_star.max(1.0);
        let below = varsigma(&k, 1.5, opt.a_star - d).unwrap();
        let above = varsigma(&k, 1.5, opt.a_star + d).unwrap();
        pass &= opt.a_star > 0.0 && opt.a_star < 50.0 && opt.residual.abs() <= 1e-8 && below < 0.0 && above > 0.0;
        details.push(format!(
            "{name} a*={:.10} |sigma(a*)|={:.2e} sign {} to {}",
            opt.a_star,
            opt.residual.abs(),
            if below < 0.0 { "-" } else { "+" },
            if above > 0.0 { "+" } else { "-" }
        ));
    }
    report(6, "optimal barrier", pass, details.join("; "), t.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_07_envelope() {
    let t = Instant::now();
    let k = closed(OU.0, OU.1, 0.5);
    let kappa = 1.5;
    let a_star = optimal_barrier(&k, kappa, &BarrierSearchConfig::default()).unwrap().a_star;
    let best = BarrierProblem::new(k.clone(), a_star, kappa).unwrap();
    let mut worst = f64::INFINITY;
    for i in 1..=40 {
        let a = 3.0 * a_star * i as f64 / 41.0;
        let other = BarrierProblem::new(k.clone(), a, kappa).unwrap();
        for x in [0.0, 0.5 * a_star, a_star] {
            worst = worst.min(best.value_function(x).unwrap() - other.value_function(x).unwrap());
        }
    }
    report(
        7,
        "V^{a*} dominates V^a",
        worst >= -1e-9,
        format!("min V^a*(x)-V^a(x) = {worst:.2e} over 40 barriers in (0, 3a*), a*={a_star:.6}"),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_08_identity_suite() {
    let t = Instant::now();
    let quad = QuadratureConfig::with_tolerances(1e-15, 1e-13);
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let mut worst = [0.0f64; 6];
    let mut positive = true;
    for (family, params) in [BM, OU, SH] {
        let k = closed(family, params, 0.5);
        // antisymmetry and diagonal zeros
        let pts = grid(-3.0, 3.0, 25);
        for &x in &pts {
            for &y in &pts {
                let (a, b) = (k.w(x, y).unwrap(), k.w(y, x).unwrap());
                worst[0] = worst[0].max(if a == 0.0 { b.abs() } else { ((a + b) / a).abs() });
                let (c, d) = (k.w12(x, y).unwrap(), k.w12(y, x).unwrap());
                worst[0] = worst[0].max(if c == 0.0 { d.abs() } else { ((c + d) / c).abs() });
            }
            worst[0] = worst[0].max(k.w(x, x).unwrap().abs()).max(k.w12(x, x).unwrap().abs());
        }
        // positivity of W12(0, a)
        for a in grid(-3.0, 1.0, 81).into_iter().map(|e| 10f64.powf(e)) {
            positive &= k.w12(0.0, a).unwrap() > 0.0;
        }
        // four-point identity
        for _ in 0..100 {
            let [a, b, c, d]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let lhs = k.eval(c, d, WOrder::W11).unwrap() * k.w12(b, a).unwrap()
                - k.w1(a, d).unwrap() * k.eval(b, c, WOrder::W122).unwrap();
            let rhs = k.w1(b, d).unwrap() * k.eval(c, a, WOrder::W112).unwrap();
            worst[1] = worst[1].max(rel(lhs, rhs));
        }
        for a in [0.5, 1.0, 2.0, 5.0] {
            // boundary linear system
            let lhs = k.w(a, 0.0).unwrap() * k.w12(0.0, a).unwrap() + k.w1(a, a).unwrap() * k.w1(0.0, 0.0).unwrap();
            let rhs = k.w1(0.0, a).unwrap() * k.w1(a, 0.0).unwrap();
            worst[2] = worst[2].max(rel(lhs, rhs));
            // integral identity
            let lhs = k.w12(0.0, a).unwrap() / k.s_prime(a).unwrap();
            let rhs = integrate(
                |x| {
                    let (two_q, _) = k.reduction_coefficients(x).unwrap();
                    two_q * k.w1(0.0, x).unwrap() / k.s_prime(x).unwrap()
                },
                0.0,
                a,
                &quad,
            )
            .unwrap();
            worst[3] = worst[3].max(rel(lhs, rhs));
            // diagonal W112
            let (two_q, _) = k.reduction_coefficients(a).unwrap();
            worst[4] = worst[4].max(rel(k.eval(a, a, WOrder::W112).unwrap(), -two_q * k.w1(a, a).unwrap()));
        }
    }
    let tol = 1e-8;
    let pass = positive && worst.iter().all(|w| *w <= tol);
    report(
        8,
        "identity suite",
        pass,
        format!(
            "antisymmetry/diagonal {:.1e}, W12(0,a)>0 {positive}, four-point {:.1e}, linear system {:.1e}, integral {:.1e}, diagonal W112 {:.1e} (tol 1e-8)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
        t.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_09_basis_invariance() {
    let t = Instant::now();
    let cfg = OdeConfig::default();
    let basis = IvpBasis { plus: (0.4, 1.7), minus: (1.5, 0.3) };
    let pts = grid(-2.0, 2.0, 17);
    let mut worst = 0.0f64;
    for (family, params) in [BM, OU] {
        let s = spec(family, params);
        let a = ScaleKernel::new(numeric_eigenpair(&s, 0.5, &cfg).unwrap(), DerivMode::DirectOde);
        let b = ScaleKernel::new(numeric_eigenpair_with_basis(&s, 0.5, &cfg, &basis).unwrap(), DerivMode::DirectOde);
        for &x in &pts {
            for &y in &pts {
                if x != y {
                    worst = worst.max(rel(b.w(x, y).unwrap(), a.w(x, y).unwrap()));
                }
            }
        }
    }
    report(
        9,
        "numeric kernel independent of IVP basis",
        worst <= 1e-9,
        format!("max relative gap {worst:.2e} (tol 1e-9, BM and OU)"),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_10_verify_is_deterministic() {
    let t = Instant::now();
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("verify.toml");
    std::fs::write(
        &cfg,
        "[model]\nfamily = \"ornstein-uhlenbeck\"\nparams = { theta = 1.0 }\n\
         [problem]\nq = 0.5\nkappa = 1.5\na = 1.0\nx = 0.5\n\
         [sim]\ndt = 1e-3\nn_paths = 2000\nseed = 99\n",
    )
    .unwrap();
    let mut bodies = Vec::new();
    let mut codes = Vec::new();
    for (i, threads) in ["1", "3", "0"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_scalekernel"))
            .args(["verify".as_ref(), cfg.as_os_str(), "--output".as_ref(), out.as_os_str()])
            .env("SCALEKERNEL_THREADS", threads)
            .status()
            .unwrap();
        codes.push(status.code());
        bodies.push(std::fs::read(&out).unwrap());
    }
    let identical = bodies.windows(2).all(|w| w[0] == w[1]) && codes.windows(2).all(|w| w[0] == w[1]);
    report(
        10,
        "repeated verify runs are byte-identical",
        identical && !bodies[0].is_empty(),
        format!("3 runs (1, 3, auto threads), exit codes {codes:?}, {} bytes each", bodies[0].len()),
        t.elapsed(),
        Duration::from_secs(600),
    );
}
