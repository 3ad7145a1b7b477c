//! Parameter sweeps: `param=start:stop:count` or `param=v1,v2,...`.

use std::path::Path;

use serde_json::{json, Value as Json};
use toml::{Table, Value};

use crate::config::{set_path, validate_with, ConfigError, Scenario};
use crate::output::{run_to_dir, write_config_errors, EXIT_CONFIG};

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<Value>,
}

fn scalar(text: &str) -> Result<Value, String> {
    let doc: Table = format!("v = {text}").parse().map_err(|_| format!("`{text}` is not a TOML scalar"))?;
    match doc.get("v") {
        Some(v @ (Value::Integer(_) | Value::Float(_) | Value::Boolean(_) | Value::String(_))) => Ok(v.clone()),
        _ => Err(format!("`{text}` is not a TOML scalar")),
    }
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (param, range) = s.split_once('=').ok_or_else(|| format!("expected <param>=<range>, got `{s}`"))?;
        let param = param.trim().to_string();
        if param.is_empty() {
            return Err("empty sweep parameter".into());
        }
        let parts: Vec<&str> = range.split(':').map(str::trim).collect();
        let values = if parts.len() == 3 {
            let count: usize = parts[2].parse().map_err(|_| format!("sweep count `{}` is not an integer", parts[2]))?;
            if count == 0 {
                return Err("sweep count must be at least 1".into());
            }
            let (a, b) = (scalar(parts[0])?, scalar(parts[1])?);
            match (&a, &b) {
                (Value::Integer(i), Value::Integer(j)) if count > 1 && (j - i) % (count as i64 - 1) == 0 => {
                    let step = (j - i) / (count as i64 - 1);
                    (0..count as i64).map(|k| Value::Integer(i + k * step)).collect()
                }
                _ => {
                    let lo = a.as_float().or(a.as_integer().map(|v| v as f64)).ok_or("sweep bounds must be numbers")?;
                    let hi = b.as_float().or(b.as_integer().map(|v| v as f64)).ok_or("sweep bounds must be numbers")?;
                    (0..count)
                        .map(|k| {
                            let f = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
                            Value::Float(if k + 1 == count { hi } else { lo + (hi - lo) * f })
                        })
                        .collect()
                }
            }
        } else if parts.len() == 1 {
            range.split(',').map(|v| scalar(v.trim())).collect::<Result<Vec<_>, _>>()?
        } else {
            return Err(format!("range `{range}` must be start:stop:count or a comma list"));
        };
        Ok(Sweep { param, values })
    }
}

fn run_point(base: &Table, scenario: Scenario, seed: Option<u64>, param: &str, value: &Value, dir: &Path) -> std::io::Result<(i32, Json)> {
    let mut doc = base.clone();
    let cfg = set_path(&mut doc, param, value.clone())
        .map_err(|m| vec![ConfigError { path: param.to_string(), message: m }])
        .and_then(|_| validate_with(&doc.to_string(), Some(scenario), seed).map_err(|e| e.0));
    match cfg {
        Ok(cfg) => {
            let report = run_to_dir(&cfg, dir)?;
            let r = &report.result;
            let results = r.get("results").cloned().unwrap_or(Json::Null);
            Ok((report.exit_code, json!({ "status": r["status"], "trust": r["trust"], "results": results })))
        }
        Err(errors) => {
            write_config_errors(dir, &errors)?;
            let list: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
            Ok((EXIT_CONFIG, json!({ "status": "config-error", "errors": list })))
        }
    }
}

/// Runs every point of the sweep on its own thread into `out/sweep-NNN`
/// and merges the summaries into `sweep.json`. Returns the worst exit code.
pub fn run_sweep(raw: &str, scenario: Scenario, seed: Option<u64>, sweep: &Sweep, out: &Path) -> std::io::Result<i32> {
    let base: Table = raw.parse().unwrap_or_default();
    let outcomes: Vec<std::io::Result<(i32, Json)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sweep
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (base, dir) = (&base, out.join(format!("sweep-{i:03}")));
                scope.spawn(move || run_point(base, scenario, seed, &sweep.param, v, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut worst = 0;
    let mut points = Vec::new();
    for (i, (v, outcome)) in sweep.values.iter().zip(outcomes).enumerate() {
        let (code, summary) = outcome?;
        worst = worst.max(code);
        points.push(json!({
            "index": i,
            "dir": format!("sweep-{i:03}"),
            "value": serde_json::to_value(v).unwrap_or(Json::Null),
            "exit_code": code,
            "summary": summary,
        }));
    }
    let doc = json!({ "scenario": scenario.name(), "param": sweep.param, "points": points });
    std::fs::write(out.join("sweep.json"), format!("{doc:#}\n"))?;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges_and_lists() {
        let s: Sweep = "physics.t=0:1:5".parse().unwrap();
        assert_eq!(s.param, "physics.t");
        assert_eq!(s.values.len(), 5);
        assert_eq!(s.values[4], Value::Float(1.0));
        let s: Sweep = "physics.t=0.0:1.0:3".parse().unwrap();
        assert_eq!(s.values, vec![Value::Float(0.0), Value::Float(0.5), Value::Float(1.0)]);
        let s: Sweep = "truncation.signal=8:16:3".parse().unwrap();
        assert_eq!(s.values, vec![Value::Integer(8), Value::Integer(12), Value::Integer(16)]);
        let s: Sweep = "fom.g_max=10,100".parse().unwrap();
        assert_eq!(s.values, vec![Value::Integer(10), Value::Integer(100)]);
        assert!("nonsense".parse::<Sweep>().is_err());
        assert!("a=1:2".parse::<Sweep>().is_err());
    }
}
