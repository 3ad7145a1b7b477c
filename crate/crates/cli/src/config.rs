//! Scenario configuration: TOML parsing, validation with field paths, and a
//! canonical serialized form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Oracle,
    Gif,
    Condition,
    QndXppx,
    Wigner,
    Fom,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Scenario::Oracle, Scenario::Gif, Scenario::Condition, Scenario::QndXppx, Scenario::Wigner, Scenario::Fom];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Oracle => "oracle",
            Scenario::Gif => "gif",
            Scenario::Condition => "condition",
            Scenario::QndXppx => "qnd-xppx",
            Scenario::Wigner => "wigner",
            Scenario::Fom => "fom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}` (expected oracle, gif, condition, qnd-xppx, wigner or fom)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub n: f64,
    pub g: f64,
    pub delta: f64,
    pub lambda: f64,
    pub t: f64,
    pub dt: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics { n: 4.0, g: 1.0, delta: 0.0, lambda: 10.0, t: 0.2, dt: 0.005 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub signal: usize,
    pub pump: usize,
    pub residual_signal: usize,
    pub residual_pump: usize,
    pub tail_tolerance: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { signal: 24, pump: 32, residual_signal: 16, residual_pump: 16, tail_tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub extent: f64,
    pub outcome_extent: f64,
    pub resolution: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { points: 201, extent: 5.0, outcome_extent: 8.0, resolution: 0.01 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    /// Vacuum for the signal, the mean-field coherent state `i√n` for the
    /// pump of OPA scenarios, vacuum for the `qnd-xppx` pump.
    Auto,
    Vacuum,
    Fock,
    Coherent,
    Squeezed,
    Cat,
    MeanField,
}

impl StateKind {
    const NAMES: [(&'static str, StateKind); 7] = [
        ("auto", StateKind::Auto),
        ("vacuum", StateKind::Vacuum),
        ("fock", StateKind::Fock),
        ("coherent", StateKind::Coherent),
        ("squeezed", StateKind::Squeezed),
        ("cat", StateKind::Cat),
        ("mean-field", StateKind::MeanField),
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub kind: StateKind,
    pub level: usize,
    /// `[re, im]`.
    pub alpha: [f64; 2],
    pub r: f64,
    pub phi: f64,
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec { kind: StateKind::Auto, level: 0, alpha: [0.0, 0.0], r: 0.0, phi: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    PhaseMatched,
    PhaseMismatched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeChoice {
    Peak,
    Sample,
    Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QndModeName {
    Effective,
    Exact,
    ExactLiteral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    /// Pump quadrature angle; omitted means the model's natural readout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_angle: Option<f64>,
    pub outcome: OutcomeChoice,
    pub outcome_value: f64,
    pub qnd_mode: QndModeName,
    pub shots: usize,
    pub k_max: usize,
    pub compare_oracle: bool,
}

impl Default for Model {
    fn default() -> Self {
        Model {
            kind: ModelKind::PhaseMatched,
            readout_angle: None,
            outcome: OutcomeChoice::Peak,
            outcome_value: 0.0,
            qnd_mode: QndModeName::Effective,
            shots: 0,
            k_max: 2,
            compare_oracle: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fom {
    pub g_max: f64,
    pub g_over_kappa: f64,
    pub zeta_target: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub n_points: usize,
    pub gt_max: f64,
    pub gt_points: usize,
    pub wavelength: f64,
    pub kappa_over_g: f64,
}

impl Default for Fom {
    fn default() -> Self {
        Fom {
            g_max: 100.0,
            g_over_kappa: 1.0,
            zeta_target: 1.0,
            n_min: 1.0,
            n_max: 1e4,
            n_points: 401,
            gt_max: 0.5,
            gt_points: 501,
            wavelength: 1.55e-6,
            kappa_over_g: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub physics: Physics,
    pub truncation: Truncation,
    pub grid: Grid,
    pub signal: StateSpec,
    pub pump: StateSpec,
    pub model: Model,
    pub fom: Fom,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            seed: None,
            physics: Physics::default(),
            truncation: Truncation::default(),
            grid: Grid::default(),
            signal: StateSpec::default(),
            pump: StateSpec::default(),
            model: Model::default(),
            fom: Fom::default(),
        }
    }

    /// Whether the run draws random numbers and therefore needs a seed.
    pub fn samples(&self) -> bool {
        match self.scenario {
            Scenario::QndXppx => self.model.shots > 0,
            Scenario::Condition => self.model.outcome == OutcomeChoice::Sample,
            _ => false,
        }
    }

    /// Canonical TOML: every field present, fixed section order.
    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{} configuration error(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
pub struct ConfigErrors(pub Vec<ConfigError>);

struct Collector {
    errors: Vec<ConfigError>,
}

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError { path: path.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, path: &str, message: impl Into<String>) {
        if !ok {
            self.push(path, message);
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// Reads the keys of one section, recording type errors and unknown keys.
struct Section<'a> {
    name: &'a str,
    table: Table,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn f64(&mut self, key: &str, slot: &mut f64, errs: &mut Collector) {
        match self.table.remove(key) {
            None => {}
            Some(Value::Float(v)) => *slot = v,
            Some(Value::Integer(v)) => *slot = v as f64,
            Some(other) => errs.push(self.path(key), format!("expected a number, found {}", type_name(&other))),
        }
    }

    fn usize(&mut self, key: &str, slot: &mut usize, errs: &mut Collector) {
        match self.table.remove(key) {
            None => {}
            Some(Value::Integer(v)) if v >= 0 => *slot = v as usize,
            Some(Value::Integer(v)) => errs.push(self.path(key), format!("expected a non-negative integer, found {v}")),
            Some(other) => errs.push(self.path(key), format!("expected an integer, found {}", type_name(&other))),
        }
    }

    fn bool(&mut self, key: &str, slot: &mut bool, errs: &mut Collector) {
        match self.table.remove(key) {
            None => {}
            Some(Value::Boolean(v)) => *slot = v,
            Some(other) => errs.push(self.path(key), format!("expected a boolean, found {}", type_name(&other))),
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, names: &[(&str, T)], slot: &mut T, errs: &mut Collector) {
        match self.table.remove(key) {
            None => {}
            Some(Value::String(s)) => match names.iter().find(|(n, _)| *n == s) {
                Some((_, v)) => *slot = *v,
                None => {
                    let allowed: Vec<&str> = names.iter().map(|(n, _)| *n).collect();
                    errs.push(self.path(key), format!("unknown value `{s}` (expected one of {})", allowed.join(", ")))
                }
            },
            Some(other) => errs.push(self.path(key), format!("expected a string, found {}", type_name(&other))),
        }
    }

    fn pair(&mut self, key: &str, slot: &mut [f64; 2], errs: &mut Collector) {
        match self.table.remove(key) {
            None => {}
            Some(Value::Array(items)) if items.len() == 2 => {
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Float(v) => slot[i] = *v,
                        Value::Integer(v) => slot[i] = *v as f64,
                        other => errs.push(format!("{}[{i}]", self.path(key)), format!("expected a number, found {}", type_name(other))),
                    }
                }
            }
            Some(other) => errs.push(self.path(key), format!("expected [re, im], found {}", type_name(&other))),
        }
    }

    fn finish(self, errs: &mut Collector) {
        for key in self.table.keys() {
            errs.push(self.path(key), "unknown field");
        }
    }
}

fn section<'a>(root: &mut Table, name: &'a str, errs: &mut Collector) -> Section<'a> {
    let table = match root.remove(name) {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(other) => {
            errs.push(name, format!("expected a table, found {}", type_name(&other)));
            Table::new()
        }
    };
    Section { name, table }
}

fn read_state(root: &mut Table, name: &str, spec: &mut StateSpec, errs: &mut Collector) {
    let mut s = section(root, name, errs);
    s.choice("kind", &StateKind::NAMES, &mut spec.kind, errs);
    s.usize("level", &mut spec.level, errs);
    s.pair("alpha", &mut spec.alpha, errs);
    s.f64("r", &mut spec.r, errs);
    s.f64("phi", &mut spec.phi, errs);
    s.finish(errs);
}

/// Parses a raw TOML document; `scenario` and `seed` override the file.
pub fn validate_config(raw: &str) -> Result<ScenarioConfig, ConfigErrors> {
    validate_with(raw, None, None)
}

pub fn validate_with(raw: &str, scenario: Option<Scenario>, seed: Option<u64>) -> Result<ScenarioConfig, ConfigErrors> {
    let mut root: Table = raw.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![ConfigError { path: "<document>".into(), message: e.message().trim().to_string() }])
    })?;
    let mut errs = Collector { errors: Vec::new() };

    let file_scenario = match root.remove("scenario") {
        None => None,
        Some(Value::String(s)) => match s.parse::<Scenario>() {
            Ok(k) => Some(k),
            Err(e) => {
                errs.push("scenario", e);
                None
            }
        },
        Some(other) => {
            errs.push("scenario", format!("expected a string, found {}", type_name(&other)));
            None
        }
    };
    let kind = match (scenario, file_scenario) {
        (Some(cli), Some(file)) if cli != file => {
            errs.push("scenario", format!("file declares `{file}` but `{cli}` was requested"));
            cli
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => {
            errs.push("scenario", "missing field (pass the scenario on the command line or set it in the file)");
            Scenario::Oracle
        }
    };
    let mut cfg = ScenarioConfig::defaults(kind);

    match root.remove("seed") {
        None => {}
        Some(Value::Integer(v)) if v >= 0 => cfg.seed = Some(v as u64),
        Some(other) => errs.push("seed", format!("expected a non-negative integer, found {other}")),
    }
    if seed.is_some() {
        cfg.seed = seed;
    }

    let mut s = section(&mut root, "physics", &mut errs);
    let p = &mut cfg.physics;
    s.f64("n", &mut p.n, &mut errs);
    s.f64("g", &mut p.g, &mut errs);
    s.f64("delta", &mut p.delta, &mut errs);
    s.f64("lambda", &mut p.lambda, &mut errs);
    s.f64("t", &mut p.t, &mut errs);
    s.f64("dt", &mut p.dt, &mut errs);
    s.finish(&mut errs);

    let mut s = section(&mut root, "truncation", &mut errs);
    let tr = &mut cfg.truncation;
    s.usize("signal", &mut tr.signal, &mut errs);
    s.usize("pump", &mut tr.pump, &mut errs);
    s.usize("residual_signal", &mut tr.residual_signal, &mut errs);
    s.usize("residual_pump", &mut tr.residual_pump, &mut errs);
    s.f64("tail_tolerance", &mut tr.tail_tolerance, &mut errs);
    s.finish(&mut errs);

    let mut s = section(&mut root, "grid", &mut errs);
    let gr = &mut cfg.grid;
    s.usize("points", &mut gr.points, &mut errs);
    s.f64("extent", &mut gr.extent, &mut errs);
    s.f64("outcome_extent", &mut gr.outcome_extent, &mut errs);
    s.f64("resolution", &mut gr.resolution, &mut errs);
    s.finish(&mut errs);

    read_state(&mut root, "signal", &mut cfg.signal, &mut errs);
    read_state(&mut root, "pump", &mut cfg.pump, &mut errs);

    let mut s = section(&mut root, "model", &mut errs);
    let m = &mut cfg.model;
    s.choice(
        "kind",
        &[("phase-matched", ModelKind::PhaseMatched), ("phase-mismatched", ModelKind::PhaseMismatched)],
        &mut m.kind,
        &mut errs,
    );
    let mut angle = f64::NAN;
    s.f64("readout_angle", &mut angle, &mut errs);
    if !angle.is_nan() {
        m.readout_angle = Some(angle);
    }
    s.choice(
        "outcome",
        &[("peak", OutcomeChoice::Peak), ("sample", OutcomeChoice::Sample), ("value", OutcomeChoice::Value)],
        &mut m.outcome,
        &mut errs,
    );
    s.f64("outcome_value", &mut m.outcome_value, &mut errs);
    s.choice(
        "qnd_mode",
        &[("effective", QndModeName::Effective), ("exact", QndModeName::Exact), ("exact-literal", QndModeName::ExactLiteral)],
        &mut m.qnd_mode,
        &mut errs,
    );
    s.usize("shots", &mut m.shots, &mut errs);
    s.usize("k_max", &mut m.k_max, &mut errs);
    s.bool("compare_oracle", &mut m.compare_oracle, &mut errs);
    s.finish(&mut errs);

    let mut s = section(&mut root, "fom", &mut errs);
    let f = &mut cfg.fom;
    s.f64("g_max", &mut f.g_max, &mut errs);
    s.f64("g_over_kappa", &mut f.g_over_kappa, &mut errs);
    s.f64("zeta_target", &mut f.zeta_target, &mut errs);
    s.f64("n_min", &mut f.n_min, &mut errs);
    s.f64("n_max", &mut f.n_max, &mut errs);
    s.usize("n_points", &mut f.n_points, &mut errs);
    s.f64("gt_max", &mut f.gt_max, &mut errs);
    s.usize("gt_points", &mut f.gt_points, &mut errs);
    s.f64("wavelength", &mut f.wavelength, &mut errs);
    s.f64("kappa_over_g", &mut f.kappa_over_g, &mut errs);
    s.finish(&mut errs);

    for key in root.keys() {
        errs.push(key.as_str(), "unknown field");
    }

    check_domains(&cfg, &mut errs);
    if errs.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errs.errors))
    }
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

fn check_state(name: &str, spec: &StateSpec, dim: usize, errs: &mut Collector) {
    if spec.kind == StateKind::Fock {
        errs.check(spec.level < dim, &format!("{name}.level"), format!("level {} does not fit in {dim} Fock levels", spec.level));
    }
    errs.check(spec.alpha.iter().all(|v| finite(*v)), &format!("{name}.alpha"), "must be finite");
    errs.check(finite(spec.r) && spec.r >= 0.0, &format!("{name}.r"), "must be finite and >= 0");
    errs.check(finite(spec.phi), &format!("{name}.phi"), "must be finite");
}

fn check_domains(cfg: &ScenarioConfig, errs: &mut Collector) {
    let p = &cfg.physics;
    let kind = cfg.scenario;
    let dynamic = matches!(kind, Scenario::Oracle | Scenario::Gif | Scenario::Condition | Scenario::QndXppx);
    if dynamic {
        errs.check(finite(p.n) && p.n >= 0.0, "physics.n", "must be finite and >= 0");
        errs.check(finite(p.g) && p.g >= 0.0, "physics.g", "must be finite and >= 0");
        errs.check(finite(p.delta), "physics.delta", "must be finite");
        errs.check(finite(p.t) && p.t >= 0.0, "physics.t", "must be finite and >= 0");
        errs.check(finite(p.dt) && p.dt > 0.0, "physics.dt", "must be finite and > 0");
    }
    if matches!(kind, Scenario::Condition | Scenario::QndXppx) {
        errs.check(p.g > 0.0, "physics.g", "must be > 0 for a conditioning run");
        errs.check(p.t > 0.0, "physics.t", "must be > 0 for a conditioning run");
    }
    if kind == Scenario::QndXppx {
        errs.check(finite(p.lambda) && p.lambda > 1.0, "physics.lambda", "must be finite and > 1");
    }
    if kind == Scenario::Condition && cfg.model.kind == ModelKind::PhaseMismatched {
        let edge = p.g * p.n.sqrt();
        errs.check(
            p.delta > edge,
            "physics.delta",
            format!("RegimeViolation: the phase-mismatched model needs delta > g*sqrt(n) = {edge}, got {}", p.delta),
        );
    }

    let tr = &cfg.truncation;
    errs.check(
        tr.tail_tolerance.is_finite() && tr.tail_tolerance > 0.0 && tr.tail_tolerance < 1.0,
        "truncation.tail_tolerance",
        "must lie in (0, 1)",
    );
    let uses_lab = matches!(kind, Scenario::Oracle | Scenario::Gif | Scenario::QndXppx | Scenario::Wigner);
    let uses_residual = matches!(kind, Scenario::Gif | Scenario::Condition);
    if uses_lab {
        errs.check(tr.signal >= 2, "truncation.signal", "needs at least 2 levels");
        if kind != Scenario::Wigner {
            errs.check(tr.pump >= 2, "truncation.pump", "needs at least 2 levels");
        }
    }
    if uses_residual {
        errs.check(tr.residual_signal >= 2, "truncation.residual_signal", "needs at least 2 levels");
        errs.check(tr.residual_pump >= 2, "truncation.residual_pump", "needs at least 2 levels");
    }

    let gr = &cfg.grid;
    errs.check(gr.points >= 2, "grid.points", "needs at least 2 points");
    errs.check(finite(gr.extent) && gr.extent > 0.0, "grid.extent", "must be finite and > 0");
    errs.check(finite(gr.outcome_extent) && gr.outcome_extent > 0.0, "grid.outcome_extent", "must be finite and > 0");
    errs.check(finite(gr.resolution) && gr.resolution > 0.0, "grid.resolution", "must be finite and > 0");

    if matches!(kind, Scenario::Oracle | Scenario::QndXppx | Scenario::Wigner) {
        check_state("signal", &cfg.signal, tr.signal, errs);
    }
    if matches!(kind, Scenario::Oracle | Scenario::QndXppx) {
        check_state("pump", &cfg.pump, tr.pump, errs);
    }

    let m = &cfg.model;
    if let Some(a) = m.readout_angle {
        errs.check(finite(a), "model.readout_angle", "must be finite");
    }
    errs.check(finite(m.outcome_value), "model.outcome_value", "must be finite");
    if kind == Scenario::Condition {
        errs.check(m.k_max <= 8, "model.k_max", "must be <= 8");
    }
    if cfg.samples() && cfg.seed.is_none() {
        errs.push("seed", "missing field: this scenario draws random outcomes and needs a seed (set `seed` or pass --seed)");
    }

    if kind == Scenario::Fom {
        let f = &cfg.fom;
        errs.check(finite(f.g_max) && f.g_max >= 1.0, "fom.g_max", "must be finite and >= 1");
        errs.check(finite(f.g_over_kappa) && f.g_over_kappa > 0.0, "fom.g_over_kappa", "must be finite and > 0");
        errs.check(finite(f.zeta_target) && f.zeta_target > 0.0, "fom.zeta_target", "must be finite and > 0");
        errs.check(finite(f.n_min) && f.n_min > 0.0, "fom.n_min", "must be finite and > 0");
        errs.check(finite(f.n_max) && f.n_max >= f.n_min, "fom.n_max", "must be finite and >= fom.n_min");
        errs.check(f.n_points >= 1, "fom.n_points", "needs at least 1 point");
        errs.check(finite(f.gt_max) && f.gt_max > 0.0, "fom.gt_max", "must be finite and > 0");
        errs.check(f.gt_points >= 2, "fom.gt_points", "needs at least 2 points");
        errs.check(finite(f.wavelength) && f.wavelength > 0.0, "fom.wavelength", "must be finite and > 0");
        errs.check(finite(f.kappa_over_g) && f.kappa_over_g > 0.0, "fom.kappa_over_g", "must be finite and > 0");
    }
}

/// Sets `path = value` (dotted path) in a raw TOML document.
pub fn set_path(root: &mut Table, path: &str, value: Value) -> Result<(), String> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| format!("empty parameter path `{path}`"))?;
    let mut cur = root;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("`{part}` in `{path}` is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
