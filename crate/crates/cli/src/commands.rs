use std::str::FromStr;

use scalekernel::mc::{estimate_value, simulate_paths};
use scalekernel::model::validate_for_barrier;
use scalekernel::valuation::optimal_barrier;
use scalekernel::{BarrierProblem, OdeConfig, ScaleKernel};

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ValueCurve,
    OptimalBarrier,
    ExitProb,
    Verify,
    Simulate,
    ScaleTable,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::ValueCurve,
        Command::OptimalBarrier,
        Command::ExitProb,
        Command::Verify,
        Command::Simulate,
        Command::ScaleTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::ValueCurve => "value-curve",
            Command::OptimalBarrier => "optimal-barrier",
            Command::ExitProb => "exit-prob",
            Command::Verify => "verify",
            Command::Simulate => "simulate",
            Command::ScaleTable => "scale-table",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Verify | Command::Simulate)
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

/// |z| above which `verify` reports a failure.
pub const Z_LIMIT: f64 = 3.0;

/// A finished table. `verification_failed` is only ever set by `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub csv: String,
    pub verification_failed: bool,
    /// Diagnostics for stderr; never part of the CSV.
    pub warnings: Vec<String>,
}

/// Fixed 17-significant-digit rendering.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, cells: &[String]) {
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }
}

fn kernel(cfg: &Config) -> scalekernel::Result<ScaleKernel> {
    ScaleKernel::build(&cfg.spec, cfg.q, cfg.backend, cfg.deriv_mode, &OdeConfig::default())
}

/// The configured barrier, or the optimal one when none is given.
fn barrier(cfg: &Config, kernel: &ScaleKernel) -> scalekernel::Result<f64> {
    match cfg.a {
        Some(a) => Ok(a),
        None => Ok(optimal_barrier(kernel, cfg.kappa, &cfg.search)?.a_star),
    }
}

pub fn execute(command: Command, cfg: &Config) -> scalekernel::Result<Table> {
    let mut failed = false;
    let mut warnings = Vec::new();
    let csv = match command {
        Command::ValueCurve => value_curve(cfg)?,
        Command::OptimalBarrier => optimal(cfg, &mut warnings)?,
        Command::ExitProb => exit_prob(cfg)?,
        Command::ScaleTable => scale_table(cfg)?,
        Command::Simulate => simulate(cfg)?,
        Command::Verify => {
            let (csv, ok) = verify(cfg)?;
            failed = !ok;
            csv
        }
    };
    Ok(Table {
        csv: csv.0,
        verification_failed: failed,
        warnings,
    })
}

fn value_curve(cfg: &Config) -> scalekernel::Result<Csv> {
    let kernel = kernel(cfg)?;
    let a = barrier(cfg, &kernel)?;
    let problem = BarrierProblem::new(kernel, a, cfg.kappa)?;
    let (lo, hi) = (-0.5, a + 0.5);
    let n = cfg.grid.points;
    let mut out = Csv::new(&["x [surplus]", "V [npv]"]);
    for i in 0..n {
        let x = if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        out.row(&[num(x), num(problem.value_function(x)?)]);
    }
    Ok(out)
}

fn optimal(cfg: &Config, warnings: &mut Vec<String>) -> scalekernel::Result<Csv> {
    let kernel = kernel(cfg)?;
    let opt = optimal_barrier(&kernel, cfg.kappa, &cfg.search)?;
    let report = validate_for_barrier(&cfg.spec, cfg.q, cfg.search.a_max);
    if !report.certifies_optimal_barrier() {
        warnings.push("the barrier is a root of varsigma but its optimality is not certified".into());
        warnings.extend(report.messages.iter().cloned());
    }
    let mut out = Csv::new(&[
        "a_star [surplus]",
        "varsigma_residual [-]",
        "bracket_lo [surplus]",
        "bracket_hi [surplus]",
        "positivity_ok [bool]",
        "local_integrability_ok [bool]",
        "p2_precondition_ok [bool]",
        "constant_volatility [bool]",
        "certified [bool]",
    ]);
    out.row(&[
        num(opt.a_star),
        num(opt.residual),
        num(opt.bracket.0),
        num(opt.bracket.1),
        report.positivity_ok.to_string(),
        report.local_integrability_ok.to_string(),
        report.p2_precondition_ok.to_string(),
        report.constant_volatility.to_string(),
        report.certifies_optimal_barrier().to_string(),
    ]);
    Ok(out)
}

fn exit_prob(cfg: &Config) -> scalekernel::Result<Csv> {
    let kernel = kernel(cfg)?;
    let e = cfg.exit;
    let f = kernel.exit_functionals(e.x, e.y, e.z)?;
    let mut out = Csv::new(&[
        "x [state]",
        "y [state]",
        "z [state]",
        "up [discounted probability]",
        "down [discounted probability]",
    ]);
    out.row(&[num(e.x), num(e.y), num(e.z), num(f.up), num(f.down)]);
    Ok(out)
}

fn scale_table(cfg: &Config) -> scalekernel::Result<Csv> {
    let kernel = kernel(cfg)?;
    let g = &cfg.grid;
    let pts: Vec<f64> = (0..g.scale_points)
        .map(|i| {
            if i + 1 == g.scale_points {
                g.scale_hi
            } else {
                g.scale_lo + (g.scale_hi - g.scale_lo) * i as f64 / (g.scale_points - 1) as f64
            }
        })
        .collect();
    let mut out = Csv::new(&["x [state]", "y [state]", "W [scale]", "W1 [scale/state]", "W12 [scale/state^2]"]);
    for &x in &pts {
        for &y in &pts {
            out.row(&[num(x), num(y), num(kernel.w(x, y)?), num(kernel.w1(x, y)?), num(kernel.w12(x, y)?)]);
        }
    }
    Ok(out)
}

/// Start point for simulation: configured, else the middle of the band.
fn start(cfg: &Config, a: f64) -> f64 {
    cfg.x.unwrap_or(0.5 * a)
}

fn verify(cfg: &Config) -> scalekernel::Result<(Csv, bool)> {
    let kernel = kernel(cfg)?;
    let a = barrier(cfg, &kernel)?;
    let x = start(cfg, a);
    let closed = BarrierProblem::new(kernel, a, cfg.kappa)?.value_function(x)?;
    let est = estimate_value(&cfg.spec, a, x, cfg.q, cfg.kappa, &cfg.sim)?;
    let z = if est.std_error > 0.0 {
        (est.mean - closed) / est.std_error
    } else if est.mean == closed {
        0.0
    } else {
        f64::INFINITY
    };
    let mut out = Csv::new(&[
        "a [surplus]",
        "x [surplus]",
        "closed_form [npv]",
        "mc_mean [npv]",
        "mc_stderr [npv]",
        "z_score [-]",
        "truncation_bound [npv]",
    ]);
    out.row(&[
        num(a),
        num(x),
        num(closed),
        num(est.mean),
        num(est.std_error),
        num(z),
        num(est.truncation_bound),
    ]);
    Ok((out, z.abs() <= Z_LIMIT))
}

fn simulate(cfg: &Config) -> scalekernel::Result<Csv> {
    let a = match cfg.a {
        Some(a) => a,
        None => barrier(cfg, &kernel(cfg)?)?,
    };
    let paths = simulate_paths(&cfg.spec, a, start(cfg, a), cfg.q, &cfg.sim)?;
    let mut out = Csv::new(&[
        "path [-]",
        "pv_dividends [npv]",
        "pv_injections [npv]",
        "total_dividends [surplus]",
        "total_injections [surplus]",
        "switches [count]",
        "final_state [surplus]",
    ]);
    for (i, p) in paths.iter().enumerate() {
        out.row(&[
            i.to_string(),
            num(p.pv_dividends),
            num(p.pv_injections),
            num(p.total_dividends),
            num(p.total_injections),
            p.switches.to_string(),
            num(p.final_state),
        ]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        for v in [std::f64::consts::PI, -1e-300, 123456.789] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }
}
