//! Flat `key = value` configuration with optional `[section]` headers.
//!
//! Inside `[grid]`, `n = 64` means `grid.n = 64`; outside any section the
//! dotted form is required. `#` starts a comment. Every key has a default, so
//! an empty file is a valid configuration.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::path::PathBuf;
use std::str::FromStr;

use tcm_core::harness::{InitSpec, MmsFamily, Norm, Regime};
use tcm_core::{Component, Grid, PhysConsts, Scheme, StepPolicy, SystemVariant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: `{key}`: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, key: &str, message: impl Into<String>) -> Self {
        Self {
            line,
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSource {
    Generated(InitSpec),
    Snapshot(PathBuf),
}

/// Source term added to every run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingId {
    None,
    /// Manufactured-solution forcing; the initial state becomes the exact solution at `t = 0`.
    Manufactured(MmsFamily),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub eta_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub norm: Norm,
    /// Comparison times; empty means the run's output times.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinSettings {
    pub component: Component,
    /// Zero runs the unperturbed twin.
    pub delta0: f64,
    /// `None` inherits the regime of the initial data.
    pub regime: Option<Regime>,
    pub interval: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsSettings {
    pub family: MmsFamily,
    pub scheme: Scheme,
    pub resolutions: Vec<usize>,
    pub dts: Vec<f64>,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid: Grid,
    pub consts: PhysConsts,
    pub variant: SystemVariant,
    pub policy: StepPolicy,
    pub t_end: f64,
    pub cadence: f64,
    pub forcing: ForcingId,
    pub init: InitSource,
    pub out: PathBuf,
    pub sweep: SweepSettings,
    pub twin: TwinSettings,
    pub mms: MmsSettings,
}

impl Default for Config {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

impl Config {
    pub fn run_config(&self) -> tcm_core::harness::RunConfig {
        tcm_core::harness::RunConfig {
            grid: self.grid,
            consts: self.consts,
            variant: self.variant,
            policy: self.policy,
            t_end: self.t_end,
            cadence: self.cadence,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.init {
            InitSource::Generated(spec) => Some(spec.seed),
            InitSource::Snapshot(_) => None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        if let InitSource::Generated(spec) = &mut self.init {
            spec.seed = seed;
        }
    }
}

/// Every accepted key with its default, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("grid.n", "128"),
    ("grid.length", "6.283185307179586"),
    ("variant.kind", "p_eps"),
    ("variant.eps", "0.01"),
    ("variant.eta", "0.01"),
    ("variant.alpha", "1"),
    ("consts.preset", "physical"),
    ("consts.latent_heat", "preset"),
    ("consts.r_dry", "preset"),
    ("consts.r_vapor", "preset"),
    ("consts.c_p", "preset"),
    ("consts.gravity", "preset"),
    ("consts.h_trop", "preset"),
    ("consts.theta0", "preset"),
    ("consts.brunt_vaisala", "preset"),
    ("consts.q_bar", "preset"),
    ("consts.q_s", "preset"),
    ("consts.mu", "preset"),
    ("step.dt", "0.001"),
    ("step.cfl", "0.5"),
    ("step.eps_safety", "0.5"),
    ("step.scheme", "if_rk2"),
    ("step.min_dt", "1e-8"),
    ("run.t_end", "1"),
    ("run.cadence", "0.1"),
    ("run.forcing", "none"),
    ("run.out", "out"),
    ("init.snapshot", "(none)"),
    ("init.seed", "0"),
    ("init.regime", "subsaturated"),
    ("init.margin", "0.2"),
    ("init.kmax", "4"),
    ("init.amp_u", "1"),
    ("init.amp_v", "1"),
    ("init.amp_t", "1"),
    ("init.amp_q", "0.2"),
    ("sweep.eta_values", "0.01, 0.005, 0.0025, 0.00125, 0.000625"),
    ("sweep.eps_values", "0.1, 0.05, 0.025, 0.0125"),
    ("sweep.norm", "l2"),
    ("sweep.times", "(output times)"),
    ("twin.component", "T"),
    ("twin.delta0", "1e-8"),
    ("twin.regime", "(init.regime)"),
    ("twin.interval", "0.05"),
    ("mms.family", "decay"),
    ("mms.scheme", "(step.scheme)"),
    ("mms.resolutions", "16, 32, 64"),
    ("mms.dts", "0.004, 0.002, 0.001"),
    ("mms.t_end", "0.5"),
];

struct Entry {
    value: String,
    line: usize,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(k) => &line[..k],
        None => line,
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn lex(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut entries: HashMap<String, Entry> = HashMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(line, body, "unterminated section header"))?
                .trim();
            if !KEYS.iter().any(|(key, _)| key.split('.').next() == Some(name)) {
                return Err(ConfigError::new(line, name, "unknown section"));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line, body, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::new(line, "", "empty key"));
        }
        let full = match &section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        if !KEYS.iter().any(|(k, _)| *k == full) {
            let hint = if section.is_some() && KEYS.iter().any(|(k, _)| *k == key) {
                format!("unknown key; `{key}` is relative to the current section, move it before the first section header")
            } else {
                "unknown key".to_string()
            };
            return Err(ConfigError::new(line, &full, hint));
        }
        let value = unquote(value).to_string();
        if let Some(prev) = entries.get(&full) {
            return Err(ConfigError::new(
                line,
                &full,
                format!("duplicate key, first set on line {}", prev.line),
            ));
        }
        entries.insert(full, Entry { value, line });
    }
    Ok(entries)
}

struct Reader {
    entries: HashMap<String, Entry>,
}

impl Reader {
    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::new(self.line(key), key, message)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn parse<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn number(&self, key: &str, default: f64, ok: impl Fn(f64) -> bool, what: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.parse(key, default)?;
        if v.is_finite() && ok(v) {
            Ok(v)
        } else {
            Err(self.err(key, format!("must be {what}, got {v}")))
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.number(key, default, |v| v > 0.0, "positive")
    }

    fn non_negative(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.number(key, default, |v| v >= 0.0, "non-negative")
    }

    fn list<T>(&self, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError>
    where
        T: FromStr + Clone,
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(default.to_vec());
        };
        if v.trim().is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|e| self.err(key, format!("cannot parse list item `{item}`: {e}")))
            })
            .collect()
    }

    fn positive_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let v = self.list(key, default)?;
        match v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            Some(bad) => Err(self.err(key, format!("entries must be positive, got {bad}"))),
            None => Ok(v),
        }
    }

    fn choice<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>, valid: &str) -> Result<T, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse(v).ok_or_else(|| self.err(key, format!("expected one of {valid}, got `{v}`"))),
        }
    }
}

fn parse_scheme(s: &str) -> Option<Scheme> {
    match s {
        "if_rk2" => Some(Scheme::IfRk2),
        "if_rk3" => Some(Scheme::IfRk3),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let r = Reader { entries: lex(text)? };

    let n: usize = r.parse("grid.n", 128)?;
    let length = r.positive("grid.length", TAU)?;
    let grid = Grid::new(n, length).map_err(|e| r.err("grid.n", e.to_string()))?;

    let mut consts = r.choice(
        "consts.preset",
        PhysConsts::physical(),
        |s| match s {
            "physical" => Some(PhysConsts::physical()),
            "unit" => Some(PhysConsts::unit()),
            _ => None,
        },
        "physical, unit",
    )?;
    let positive_consts: [(&str, &mut f64); 10] = [
        ("consts.latent_heat", &mut consts.latent_heat),
        ("consts.r_dry", &mut consts.r_dry),
        ("consts.r_vapor", &mut consts.r_vapor),
        ("consts.c_p", &mut consts.c_p),
        ("consts.gravity", &mut consts.gravity),
        ("consts.h_trop", &mut consts.h_trop),
        ("consts.theta0", &mut consts.theta0),
        ("consts.q_bar", &mut consts.q_bar),
        ("consts.q_s", &mut consts.q_s),
        ("consts.mu", &mut consts.mu),
    ];
    for (key, slot) in positive_consts {
        *slot = r.positive(key, *slot)?;
    }
    consts.brunt_vaisala = r.non_negative("consts.brunt_vaisala", consts.brunt_vaisala)?;
    if consts.q_s >= 1.0 {
        return Err(r.err("consts.q_s", format!("must lie in (0, 1), got {}", consts.q_s)));
    }
    consts
        .validate()
        .map_err(|e| ConfigError::new(0, "consts", e.to_string()))?;

    let eps = r.positive("variant.eps", 1e-2)?;
    let eta = r.positive("variant.eta", 1e-2)?;
    let alpha = r.number("variant.alpha", 1.0, |a| (0.0..=1.0).contains(&a), "in [0, 1]")?;
    let variant = r.choice(
        "variant.kind",
        SystemVariant::PEps { eps },
        |s| match s {
            "p_eps_eta" => Some(SystemVariant::PEpsEta { eps, eta }),
            "p_eps" => Some(SystemVariant::PEps { eps }),
            "limit" => Some(SystemVariant::Limit { alpha }),
            _ => None,
        },
        "p_eps_eta, p_eps, limit",
    )?;

    let defaults = StepPolicy::default();
    let scheme = r.choice("step.scheme", defaults.scheme, parse_scheme, "if_rk2, if_rk3")?;
    let policy = StepPolicy {
        dt: r.positive("step.dt", defaults.dt)?,
        cfl_target: r.number("step.cfl", defaults.cfl_target, |v| v > 0.0 && v < 1.0, "in (0, 1)")?,
        eps_substep_safety: r.number(
            "step.eps_safety",
            defaults.eps_substep_safety,
            |v| v > 0.0 && v <= 1.0,
            "in (0, 1]",
        )?,
        scheme,
        min_dt: r.positive("step.min_dt", defaults.min_dt)?,
    };
    if policy.min_dt > policy.dt {
        return Err(r.err("step.min_dt", "must not exceed step.dt"));
    }

    let t_end = r.non_negative("run.t_end", 1.0)?;
    let cadence = r.non_negative("run.cadence", 0.1)?;
    let forcing = r.choice(
        "run.forcing",
        ForcingId::None,
        |s| match s {
            "none" => Some(ForcingId::None),
            other => MmsFamily::parse(other).map(ForcingId::Manufactured),
        },
        "none, decay, rational, saturated",
    )?;
    if matches!(forcing, ForcingId::Manufactured(_)) && (length - TAU).abs() > 1e-12 {
        return Err(r.err("run.forcing", "manufactured forcing needs grid.length = 2 pi"));
    }
    let out = PathBuf::from(r.raw("run.out").unwrap_or("out"));

    let base = InitSpec::default();
    let regime = r.choice("init.regime", base.regime, Regime::parse, "subsaturated, supersaturated, mixed")?;
    let spec = InitSpec {
        seed: r.parse("init.seed", base.seed)?,
        regime,
        margin: r.non_negative("init.margin", base.margin)?,
        kmax: r.parse("init.kmax", base.kmax)?,
        amp_u: r.non_negative("init.amp_u", base.amp_u)?,
        amp_v: r.non_negative("init.amp_v", base.amp_v)?,
        amp_t: r.non_negative("init.amp_t", base.amp_t)?,
        amp_q: r.non_negative("init.amp_q", base.amp_q)?,
    };
    let init = match r.raw("init.snapshot") {
        Some(path) => InitSource::Snapshot(PathBuf::from(path)),
        None => {
            spec.validate(&grid).map_err(|e| {
                let key = match &e {
                    tcm_core::Error::InvalidParameter { name, .. } => format!("init.{name}"),
                    _ => "init".to_string(),
                };
                let line = match r.line(&key) {
                    0 => r.line("grid.n"),
                    l => l,
                };
                ConfigError::new(line, &key, e.to_string())
            })?;
            InitSource::Generated(spec)
        }
    };

    let sweep = SweepSettings {
        eta_values: r.positive_list("sweep.eta_values", &[1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4])?,
        eps_values: r.positive_list("sweep.eps_values", &[0.1, 0.05, 0.025, 0.0125])?,
        norm: r.choice("sweep.norm", Norm::L2, Norm::parse, "l2, h1, linf")?,
        times: r.positive_list("sweep.times", &[])?,
    };
    if let Some(bad) = sweep.times.iter().find(|&&t| t > t_end) {
        return Err(r.err("sweep.times", format!("{bad} lies beyond run.t_end = {t_end}")));
    }

    let twin = TwinSettings {
        component: r.choice("twin.component", Component::Temp, Component::parse, "u1, u2, v1, v2, T, q")?,
        delta0: r.non_negative("twin.delta0", 1e-8)?,
        regime: match r.raw("twin.regime") {
            None => None,
            Some(_) => Some(r.choice("twin.regime", regime, Regime::parse, "subsaturated, supersaturated, mixed")?),
        },
        interval: r.positive("twin.interval", 0.05)?,
    };

    let mms = MmsSettings {
        family: r.choice("mms.family", MmsFamily::Decay, MmsFamily::parse, "decay, rational, saturated")?,
        scheme: r.choice("mms.scheme", scheme, parse_scheme, "if_rk2, if_rk3")?,
        resolutions: r.list("mms.resolutions", &[16, 32, 64])?,
        dts: r.positive_list("mms.dts", &[4e-3, 2e-3, 1e-3])?,
        t_end: r.positive("mms.t_end", 0.5)?,
    };
    if mms.resolutions.is_empty() {
        return Err(r.err("mms.resolutions", "needs at least one entry"));
    }
    if let Some(bad) = mms.resolutions.iter().find(|&&n| Grid::periodic(n).is_err()) {
        return Err(r.err("mms.resolutions", format!("{bad} is not an even size of at least 8")));
    }
    if mms.dts.is_empty() {
        return Err(r.err("mms.dts", "needs at least one entry"));
    }

    Ok(Config {
        grid,
        consts,
        variant,
        policy,
        t_end,
        cadence,
        forcing,
        init,
        out,
        sweep,
        twin,
        mms,
    })
}
