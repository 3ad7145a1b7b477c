//! Running a scenario into an output directory: CSV formatting, the result
//! JSON with its trust block, and exit codes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mesoscope_core::{Error, Trust};
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::scenarios::run_scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_UNTRUSTED: i32 = 2;

/// A file written next to `result.json`.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: String) -> Self {
        Artifact { name: name.into(), contents }
    }
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a header row and every value in `{:.16e}`.
pub fn csv_columns<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn trust_json(t: &Trust) -> Value {
    json!({
        "tail_mass": t.tail_mass,
        "tail_tolerance": t.tail_tolerance,
        "norm_drift": t.norm_drift,
        "symplectic_drift": t.symplectic_drift,
        "charge_drift": t.charge_drift,
        "trusted": t.is_trusted(),
    })
}

/// Errors that mean "the numbers cannot be trusted" rather than "the
/// request was malformed".
pub fn is_trust_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::TruncationOverflow { .. }
            | Error::NormDrift { .. }
            | Error::NotSymplectic { .. }
            | Error::StepTooLarge { .. }
            | Error::FrameInconsistent { .. }
    )
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::ModeMismatch { .. } => "ModeMismatch",
        Error::TruncationOverflow { .. } => "TruncationOverflow",
        Error::NotSymplectic { .. } => "NotSymplectic",
        Error::GridEmpty => "GridEmpty",
        Error::StepTooLarge { .. } => "StepTooLarge",
        Error::NormDrift { .. } => "NormDrift",
        Error::FrameInconsistent { .. } => "FrameInconsistent",
        Error::RegimeViolation(_) => "RegimeViolation",
        Error::ZeroDensity { .. } => "ZeroDensity",
        Error::Domain(_) => "Domain",
        Error::InvalidArgument(_) => "InvalidArgument",
    }
}

/// The trust block reported alongside a failed run.
fn failure_trust(e: &Error, tolerance: f64) -> Trust {
    let mut t = Trust::with_tolerance(tolerance);
    match *e {
        Error::TruncationOverflow { mass, tolerance } => {
            t.tail_mass = mass;
            t.tail_tolerance = tolerance;
        }
        Error::NormDrift { drift } => t.norm_drift = drift,
        Error::NotSymplectic { defect } => t.symplectic_drift = defect,
        Error::StepTooLarge { drift } => t.charge_drift = drift,
        _ => {}
    }
    t
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub result: Value,
    pub dir: PathBuf,
}

fn pretty(v: &Value) -> String {
    format!("{v:#}\n")
}

/// Runs one configuration and writes `config.toml`, the scenario artifacts
/// and `result.json` into `dir`.
pub fn run_to_dir(cfg: &ScenarioConfig, dir: &Path) -> io::Result<RunReport> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_canonical())?;
    let (exit_code, result) = match run_scenario(cfg) {
        Ok(out) => {
            for a in &out.artifacts {
                fs::write(dir.join(&a.name), &a.contents)?;
            }
            let trusted = out.trust.is_trusted();
            let mut names: Vec<&str> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
            names.extend(["config.toml", "result.json"]);
            names.sort_unstable();
            let result = json!({
                "scenario": cfg.scenario.name(),
                "seed": cfg.seed,
                "status": if trusted { "ok" } else { "untrusted" },
                "trust": trust_json(&out.trust),
                "results": out.results,
                "warnings": out.warnings,
                "artifacts": names,
            });
            (if trusted { EXIT_OK } else { EXIT_UNTRUSTED }, result)
        }
        Err(e) => {
            let trust_failure = is_trust_failure(&e);
            let trust = failure_trust(&e, cfg.truncation.tail_tolerance);
            let result = json!({
                "scenario": cfg.scenario.name(),
                "seed": cfg.seed,
                "status": "error",
                "error": { "kind": error_kind(&e), "message": e.to_string() },
                "trust": trust_json(&trust),
                "artifacts": ["config.toml", "result.json"],
            });
            (if trust_failure { EXIT_UNTRUSTED } else { EXIT_CONFIG }, result)
        }
    };
    fs::write(dir.join("result.json"), pretty(&result))?;
    Ok(RunReport { exit_code, result, dir: dir.to_path_buf() })
}

/// Writes a diagnostic `result.json` for a configuration that failed
/// validation, listing every error with its field path.
pub fn write_config_errors(dir: &Path, errors: &[crate::config::ConfigError]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let list: Vec<Value> = errors.iter().map(|e| json!({ "path": e.path, "message": e.message })).collect();
    let result = json!({ "status": "config-error", "errors": list });
    fs::write(dir.join("result.json"), pretty(&result))
}
