//! Problem description files.
//!
//! The format is TOML. Every key is checked against the schema below and
//! anything unrecognised is rejected by its full dotted path.
//!
//! ```toml
//! [model]
//! family = "ornstein-uhlenbeck"     # brownian-drift | ornstein-uhlenbeck | shiryaev-log
//! params = { theta = 1.0 }          # drift/volatility, theta, or nu/l
//!
//! [problem]
//! q = 0.5
//! kappa = 1.5
//! a = 1.0                           # optional; defaults to the optimal barrier
//! x = 0.5                           # optional start for verify/simulate; defaults to a/2
//! exit = { x = 0.0, y = 1.0, z = 2.0 }
//!
//! [search]
//! a_max = 50.0
//!
//! [numerics]
//! backend = "closed-form"           # or ode-ivp
//! deriv_mode = "direct-ode"         # or reduction
//!
//! [grid]
//! points = 201                      # value-curve
//! scale_lo = -2.0
//! scale_hi = 2.0
//! scale_points = 21                 # scale-table, per axis
//!
//! [sim]
//! dt = 1e-4
//! horizon = 40.0
//! n_paths = 200000
//! seed = 20240501
//! antithetic = false
//!
//! [output]
//! path = "out.csv"                  # optional; stdout otherwise
//! manifest = "out.manifest.json"    # optional; defaults next to `path`
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use scalekernel::{
    make_diffusion, Backend, BarrierSearchConfig, DerivMode, DiffusionSpec, Family, SimConfig,
};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{key}: {message}")]
    Schema { key: String, message: String },
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            key: key.into(),
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitPoints {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub points: usize,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub scale_points: usize,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub family: Family,
    /// Named model parameters in the order `make_diffusion` expects.
    pub params: Vec<(&'static str, f64)>,
    pub spec: DiffusionSpec,
    pub q: f64,
    pub kappa: f64,
    pub a: Option<f64>,
    pub x: Option<f64>,
    pub exit: ExitPoints,
    pub search: BarrierSearchConfig,
    pub backend: Backend,
    pub deriv_mode: DerivMode,
    pub grid: GridConfig,
    pub sim: SimConfig,
    pub output: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

/// Reads and validates a problem file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        file: path.display().to_string(),
        source,
    })?;
    let mut config = parse_str(&text, &path.display().to_string())?;
    // relative output paths are taken relative to the config file
    let base = path.parent().unwrap_or(Path::new(""));
    config.output = config.output.map(|p| base.join(p));
    config.manifest = config.manifest.map(|p| base.join(p));
    Ok(config)
}

/// Parses a problem description held in memory; `file` names it in errors.
pub fn parse_str(text: &str, file: &str) -> Result<Config> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e
            .span()
            .map(|span| line_column(text, span.start))
            .unwrap_or((1, 1));
        ConfigError::Parse {
            file: file.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    from_table(&table)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// A table being consumed key by key.
struct Section<'a> {
    prefix: String,
    table: Option<&'a Table>,
    seen: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn root(table: &'a Table) -> Self {
        Section {
            prefix: String::new(),
            table: Some(table),
            seen: BTreeSet::new(),
        }
    }

    fn key(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn section(&mut self, key: &str) -> Result<Section<'a>> {
        let full = self.key(key);
        let table = match self.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                return Err(ConfigError::schema(full, format!("expected a table, found {}", other.type_str())))
            }
        };
        Ok(Section {
            prefix: full,
            table,
            seen: BTreeSet::new(),
        })
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        let full = self.key(key);
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(ConfigError::schema(full, format!("expected a number, found {}", other.type_str()))),
        }
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        let full = self.key(key);
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(other) => Err(ConfigError::schema(
                full,
                format!("expected a non-negative integer, found {other}"),
            )),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        let full = self.key(key);
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(v)) => Ok(Some(*v)),
            Some(other) => Err(ConfigError::schema(full, format!("expected a boolean, found {}", other.type_str()))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<&'a str>> {
        let full = self.key(key);
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(v)) => Ok(Some(v.as_str())),
            Some(other) => Err(ConfigError::schema(full, format!("expected a string, found {}", other.type_str()))),
        }
    }

    fn required_f64(&mut self, key: &str) -> Result<f64> {
        let full = self.key(key);
        self.f64(key)?.ok_or_else(|| ConfigError::schema(full, "missing required key"))
    }

    /// Rejects any key that was not read.
    fn finish(self) -> Result<()> {
        if let Some(table) = self.table {
            if let Some(extra) = table.keys().find(|k| !self.seen.contains(*k)) {
                return Err(ConfigError::schema(self.key(extra), "unknown key"));
            }
        }
        Ok(())
    }
}

fn family_params(family: Family) -> &'static [(&'static str, Option<f64>)] {
    match family {
        Family::BrownianDrift => &[("drift", Some(0.0)), ("volatility", Some(1.0))],
        Family::OrnsteinUhlenbeck => &[("theta", None)],
        Family::ShiryaevLog => &[("nu", None), ("l", None)],
        Family::Custom => &[],
    }
}

fn from_table(table: &Table) -> Result<Config> {
    let mut root = Section::root(table);

    let mut model = root.section("model")?;
    let family_name = model
        .string("family")?
        .ok_or_else(|| ConfigError::schema("model.family", "missing required key"))?;
    let family: Family = family_name
        .parse()
        .map_err(|e: scalekernel::Error| ConfigError::schema("model.family", e.to_string()))?;
    if family == Family::Custom {
        return Err(ConfigError::schema(
            "model.family",
            "custom diffusions need coefficient functions and are only available through the library",
        ));
    }
    let mut raw = model.section("params")?;
    let mut params = Vec::new();
    for &(name, default) in family_params(family) {
        let full = raw.key(name);
        let value = match (raw.f64(name)?, default) {
            (Some(v), _) | (None, Some(v)) => v,
            (None, None) => return Err(ConfigError::schema(full, "missing required key")),
        };
        params.push((name, value));
    }
    raw.finish()?;
    model.finish()?;
    let values: Vec<f64> = params.iter().map(|p| p.1).collect();
    let spec = make_diffusion(family, &values).map_err(|e| ConfigError::schema("model.params", e.to_string()))?;

    let mut problem = root.section("problem")?;
    let q = problem.required_f64("q")?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(ConfigError::schema("problem.q", format!("q must be positive, got {q}")));
    }
    let kappa = problem.required_f64("kappa")?;
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(ConfigError::schema("problem.kappa", format!("kappa must exceed 1, got {kappa}")));
    }
    let a = problem.f64("a")?;
    if let Some(a) = a {
        if !(a > 0.0 && a.is_finite()) {
            return Err(ConfigError::schema("problem.a", format!("a must be positive, got {a}")));
        }
    }
    let x = problem.f64("x")?;
    if let Some(x) = x {
        if !x.is_finite() {
            return Err(ConfigError::schema("problem.x", "x must be finite"));
        }
    }
    let mut ex = problem.section("exit")?;
    let exit = ExitPoints {
        x: ex.f64("x")?.unwrap_or(0.0),
        y: ex.f64("y")?.unwrap_or(1.0),
        z: ex.f64("z")?.unwrap_or(2.0),
    };
    ex.finish()?;
    if !(exit.x < exit.y && exit.y < exit.z) {
        return Err(ConfigError::schema(
            "problem.exit",
            format!("points must satisfy x < y < z, got ({}, {}, {})", exit.x, exit.y, exit.z),
        ));
    }
    problem.finish()?;

    let mut s = root.section("search")?;
    let mut search = BarrierSearchConfig::default();
    if let Some(v) = s.f64("a_max")? {
        search.a_max = v;
    }
    s.finish()?;
    search.validate().map_err(|e| ConfigError::schema("search.a_max", e.to_string()))?;

    let mut n = root.section("numerics")?;
    let backend = match n.string("backend")? {
        Some(b) => b
            .parse()
            .map_err(|e: scalekernel::Error| ConfigError::schema("numerics.backend", e.to_string()))?,
        None => Backend::ClosedForm,
    };
    let deriv_mode = match n.string("deriv_mode")? {
        Some(m) => m
            .parse()
            .map_err(|e: scalekernel::Error| ConfigError::schema("numerics.deriv_mode", e.to_string()))?,
        None => DerivMode::DirectOde,
    };
    n.finish()?;

    let mut g = root.section("grid")?;
    let grid = GridConfig {
        points: g.u64("points")?.unwrap_or(201) as usize,
        scale_lo: g.f64("scale_lo")?.unwrap_or(-2.0),
        scale_hi: g.f64("scale_hi")?.unwrap_or(2.0),
        scale_points: g.u64("scale_points")?.unwrap_or(21) as usize,
    };
    g.finish()?;
    if grid.points < 2 {
        return Err(ConfigError::schema("grid.points", "need at least 2 points"));
    }
    if grid.scale_points < 2 {
        return Err(ConfigError::schema("grid.scale_points", "need at least 2 points"));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(grid.scale_lo < grid.scale_hi) {
        return Err(ConfigError::schema("grid.scale_lo", "scale_lo must be below scale_hi"));
    }

    let mut sm = root.section("sim")?;
    let defaults = SimConfig::default();
    let sim = SimConfig {
        dt: sm.f64("dt")?.unwrap_or(defaults.dt),
        horizon: sm
            .f64("horizon")?
            .unwrap_or_else(|| (-defaults.max_discount_at_horizon.ln() / q).ceil().max(defaults.horizon)),
        n_paths: sm.u64("n_paths")?.map_or(defaults.n_paths, |v| v as usize),
        seed: sm.u64("seed")?.unwrap_or(defaults.seed),
        antithetic: sm.bool("antithetic")?.unwrap_or(defaults.antithetic),
        max_discount_at_horizon: defaults.max_discount_at_horizon,
    };
    sm.finish()?;
    sim.validate(q).map_err(|e| ConfigError::schema("sim", e.to_string()))?;

    let mut o = root.section("output")?;
    let output = o.string("path")?.map(PathBuf::from);
    let manifest = o.string("manifest")?.map(PathBuf::from);
    o.finish()?;

    root.finish()?;

    Ok(Config {
        family,
        params,
        spec,
        q,
        kappa,
        a,
        x,
        exit,
        search,
        backend,
        deriv_mode,
        grid,
        sim,
        output,
        manifest,
    })
}

impl Config {
    /// Resolved settings as sorted `key = value` lines; numbers use the
    /// shortest round-trip form. Output locations are left out.
    pub fn canonical(&self) -> String {
        let mut m = BTreeMap::new();
        let num = |v: f64| format!("{v:e}");
        m.insert("model.family".to_string(), self.family.name().to_string());
        for (name, value) in &self.params {
            m.insert(format!("model.params.{name}"), num(*value));
        }
        m.insert("problem.q".into(), num(self.q));
        m.insert("problem.kappa".into(), num(self.kappa));
        m.insert("problem.a".into(), self.a.map_or("optimal".into(), num));
        m.insert("problem.x".into(), self.x.map_or("default".into(), num));
        m.insert("problem.exit.x".into(), num(self.exit.x));
        m.insert("problem.exit.y".into(), num(self.exit.y));
        m.insert("problem.exit.z".into(), num(self.exit.z));
        m.insert("search.a_max".into(), num(self.search.a_max));
        m.insert("numerics.backend".into(), self.backend.to_string());
        m.insert(
            "numerics.deriv_mode".into(),
            match self.deriv_mode {
                DerivMode::Reduction => "reduction",
                DerivMode::DirectOde => "direct-ode",
            }
            .into(),
        );
        m.insert("grid.points".into(), self.grid.points.to_string());
        m.insert("grid.scale_lo".into(), num(self.grid.scale_lo));
        m.insert("grid.scale_hi".into(), num(self.grid.scale_hi));
        m.insert("grid.scale_points".into(), self.grid.scale_points.to_string());
        m.insert("sim.dt".into(), num(self.sim.dt));
        m.insert("sim.horizon".into(), num(self.sim.horizon));
        m.insert("sim.n_paths".into(), self.sim.n_paths.to_string());
        m.insert("sim.seed".into(), self.sim.seed.to_string());
        m.insert("sim.antithetic".into(), self.sim.antithetic.to_string());
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
