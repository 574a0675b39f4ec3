//! Line-oriented `key = value` configuration files.
//!
//! ```text
//! [model]
//! model = coupled_exp
//! mu = 50
//! sigma = 6
//! gamma0 = 1
//!
//! [constraint]
//! a = 1
//! b = 1
//! ```
//!
//! Keys may also appear before the first section header. Inside a section a
//! key must belong to that section. Unknown keys are rejected.

use std::fmt::{self, Write as _};

use normsol_core::manifold::{FiberSettings, MassConstraint};
use normsol_core::nonlinearity::default_tau;
use normsol_core::solver::GridSpec;
use normsol_core::verify::VerifySettings;
use normsol_core::{ModelKind, NonlinearityModel, SolverConfig, Spacing};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: &str, message: impl Into<String>) -> Self {
        Self { line: Some(line), key: Some(key.into()), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(key) = &self.key {
            write!(f, " (key `{key}`)")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub verify: VerifySettings,
    /// Non-fatal findings, e.g. masses outside the existence window.
    pub warnings: Vec<String>,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("grid", &["radius", "n", "spacing", "stretch"]),
    ("model", &["model", "mu", "sigma", "gamma0", "theta", "tau"]),
    ("constraint", &["a", "b"]),
    (
        "solver",
        &[
            "dt0",
            "tol_grad",
            "tol_pohozaev",
            "max_iters",
            "reproject_every",
            "n_starts",
            "seed",
            "s_scan",
            "s_range",
            "s_max",
            "tol_fiber",
            "tol_proj",
            "max_passes",
        ],
    ),
    ("verify", &["gn_p", "gn_cap", "probe_fraction", "probe_samples", "probe_seed"]),
];

const REQUIRED: [&str; 5] = ["model", "mu", "sigma", "a", "b"];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

struct Entry {
    key: &'static str,
    value: String,
    line: usize,
}

struct Entries(Vec<Entry>);

impl Entries {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.0.iter().find(|e| e.key == key)
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.get(key).map(|e| e.line)
    }

    fn float(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => match e.value.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(ConfigError::at(e.line, key, format!("unparsable value `{}`", e.value))),
            },
        }
    }

    fn int<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<T>()
                .map_err(|_| ConfigError::at(e.line, key, format!("unparsable value `{}`", e.value))),
        }
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut section: Option<&str> = None;
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').map(str::trim).ok_or_else(|| ConfigError {
                line: Some(line),
                key: None,
                message: format!("malformed section header `{content}`"),
            })?;
            section = Some(SECTIONS.iter().find(|(s, _)| *s == name).map(|(s, _)| *s).ok_or_else(|| {
                ConfigError { line: Some(line), key: None, message: format!("unknown section `[{name}]`") }
            })?);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: None,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(home) = section_of(key) else {
            return Err(ConfigError::at(line, key, "unknown key"));
        };
        if let Some(s) = section {
            if s != home {
                return Err(ConfigError::at(line, key, format!("key belongs to [{home}], not [{s}]")));
            }
        }
        let key = SECTIONS.iter().flat_map(|(_, keys)| keys.iter()).find(|k| **k == key).copied().unwrap();
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(ConfigError::at(
                line,
                key,
                format!("duplicate key (first set at line {})", prev.line),
            ));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, key, "missing value"));
        }
        out.push(Entry { key, value: value.to_string(), line });
    }
    Ok(Entries(out))
}

/// Names the offending key of a validation message when the message mentions one.
fn attribute(entries: &Entries, err: normsol_core::Error) -> ConfigError {
    let message = err.to_string();
    let words: Vec<&str> = message.split(|c: char| !(c.is_alphanumeric() || c == '_')).collect();
    let key = SECTIONS.iter().flat_map(|(_, keys)| keys.iter()).find(|k| words.contains(k)).copied();
    ConfigError {
        line: key.and_then(|k| entries.line_of(k)),
        key: key.map(String::from),
        message: format!("invalid configuration: {message}"),
    }
}

/// Parses a configuration, applying defaults for every optional key.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let e = tokenize(text)?;
    for key in REQUIRED {
        if e.get(key).is_none() {
            return Err(ConfigError {
                line: None,
                key: Some(key.into()),
                message: "missing required key".into(),
            });
        }
    }

    let kind_entry = e.get("model").unwrap();
    let kind = ModelKind::from_name(&kind_entry.value).ok_or_else(|| {
        ConfigError::at(
            kind_entry.line,
            "model",
            format!("unknown model `{}` (pure_power, coupled_exp, additive_exp)", kind_entry.value),
        )
    })?;
    let sigma = e.float("sigma", 0.0)?;
    let model = NonlinearityModel::with_constants(
        kind,
        e.float("mu", 0.0)?,
        sigma,
        e.float("gamma0", 1.0)?,
        e.float("theta", sigma)?,
        e.float("tau", default_tau(sigma))?,
    )
    .map_err(|err| attribute(&e, err))?;
    let constraint = MassConstraint::new(e.float("a", 0.0)?, e.float("b", 0.0)?, model.gamma0)
        .map_err(|err| attribute(&e, err))?;

    let grid_default = GridSpec::default();
    let spacing = match e.get("spacing").map(|x| x.value.as_str()) {
        None | Some("uniform") => {
            if let Some(s) = e.get("stretch") {
                return Err(ConfigError::at(s.line, "stretch", "stretch needs spacing = graded"));
            }
            Spacing::Uniform
        }
        Some("graded") => Spacing::Graded { stretch: e.float("stretch", 3.0)? },
        Some(other) => {
            return Err(ConfigError::at(
                e.line_of("spacing").unwrap(),
                "spacing",
                format!("unknown spacing `{other}` (uniform, graded)"),
            ))
        }
    };

    let mut solver = SolverConfig::new(constraint, model);
    solver.grid =
        GridSpec { radius: e.float("radius", grid_default.radius)?, n: e.int("n", grid_default.n)?, spacing };
    solver.dt0 = e.float("dt0", solver.dt0)?;
    solver.tol_grad = e.float("tol_grad", solver.tol_grad)?;
    solver.tol_pohozaev = e.float("tol_pohozaev", solver.tol_pohozaev)?;
    solver.max_iters = e.int("max_iters", solver.max_iters)?;
    solver.reproject_every = e.int("reproject_every", solver.reproject_every)?;
    solver.n_starts = e.int("n_starts", solver.n_starts)?;
    solver.seed = e.int("seed", solver.seed)?;
    let f = FiberSettings::default();
    solver.fiber = FiberSettings {
        s_scan: e.float("s_scan", f.s_scan)?,
        s_range: e.float("s_range", f.s_range)?,
        s_max: e.float("s_max", f.s_max)?,
        tol_fiber: e.float("tol_fiber", f.tol_fiber)?,
        tol_proj: e.float("tol_proj", f.tol_proj)?,
        max_passes: e.int("max_passes", f.max_passes)?,
    };
    solver.validate().map_err(|err| attribute(&e, err))?;

    let v = VerifySettings::default();
    let verify = VerifySettings {
        gn_p: e.float("gn_p", v.gn_p)?,
        gn_cap: e.float("gn_cap", v.gn_cap)?,
        probe_fraction: e.float("probe_fraction", v.probe_fraction)?,
        probe_samples: e.int("probe_samples", v.probe_samples)?,
        probe_seed: e.int("probe_seed", v.probe_seed)?,
    };
    if !(verify.gn_p > 2.0) {
        return Err(ConfigError::at(e.line_of("gn_p").unwrap_or(0), "gn_p", "gn_p must exceed 2"));
    }
    if !(verify.probe_fraction > 0.0) || verify.probe_samples == 0 {
        let key = if verify.probe_samples == 0 { "probe_samples" } else { "probe_fraction" };
        return Err(ConfigError::at(e.line_of(key).unwrap_or(0), key, format!("{key} must be positive")));
    }

    let mut warnings = Vec::new();
    if !constraint.admissible {
        let c = &constraint;
        warnings.push(format!(
            "a² + b² = {} is not below 2π/γ₀ = {}; existence is not guaranteed for exponential couplings",
            c.a * c.a + c.b * c.b,
            2.0 * std::f64::consts::PI / c.gamma0
        ));
    }
    Ok(RunConfig { solver, verify, warnings })
}

/// Canonical text with every key spelled out; parses back to an equal config.
pub fn render_config(cfg: &RunConfig) -> String {
    let s = &cfg.solver;
    let m = &s.model;
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("[grid]\nradius", format!("{:?}", s.grid.radius));
    put("n", s.grid.n.to_string());
    match s.grid.spacing {
        Spacing::Uniform => put("spacing", "uniform".into()),
        Spacing::Graded { stretch } => {
            put("spacing", "graded".into());
            put("stretch", format!("{stretch:?}"));
        }
    }
    put("\n[model]\nmodel", m.kind.name().into());
    put("mu", format!("{:?}", m.mu));
    put("sigma", format!("{:?}", m.sigma));
    put("gamma0", format!("{:?}", m.gamma0));
    put("theta", format!("{:?}", m.theta));
    put("tau", format!("{:?}", m.tau));
    put("\n[constraint]\na", format!("{:?}", s.constraint.a));
    put("b", format!("{:?}", s.constraint.b));
    put("\n[solver]\ndt0", format!("{:?}", s.dt0));
    put("tol_grad", format!("{:?}", s.tol_grad));
    put("tol_pohozaev", format!("{:?}", s.tol_pohozaev));
    put("max_iters", s.max_iters.to_string());
    put("reproject_every", s.reproject_every.to_string());
    put("n_starts", s.n_starts.to_string());
    put("seed", s.seed.to_string());
    put("s_scan", format!("{:?}", s.fiber.s_scan));
    put("s_range", format!("{:?}", s.fiber.s_range));
    put("s_max", format!("{:?}", s.fiber.s_max));
    put("tol_fiber", format!("{:?}", s.fiber.tol_fiber));
    put("tol_proj", format!("{:?}", s.fiber.tol_proj));
    put("max_passes", s.fiber.max_passes.to_string());
    let v = &cfg.verify;
    put("\n[verify]\ngn_p", format!("{:?}", v.gn_p));
    put("gn_cap", format!("{:?}", v.gn_cap));
    put("probe_fraction", format!("{:?}", v.probe_fraction));
    put("probe_samples", v.probe_samples.to_string());
    put("probe_seed", v.probe_seed.to_string());
    out
}
