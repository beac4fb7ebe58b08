//! Config files: a JSON object whose keys are long flag names.
//!
//! `{"lambda": 1e-7, "allow-unregularized": true, "alpha-grid": [0, 1]}`
//! expands to `--lambda 1e-7 --allow-unregularized --alpha-grid 0,1`. The
//! expansion is inserted right after the subcommand, ahead of the user's own
//! flags, so explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::args::SUBCOMMANDS;
use crate::UsageError;

/// Location of `--config FILE` or `--config=FILE` in `argv`, if any.
fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn subcommand_position(argv: &[OsString]) -> Option<usize> {
    const VALUED_GLOBALS: [&str; 3] = ["--config", "--seed", "--threads"];
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if VALUED_GLOBALS.contains(&s.as_ref()) {
            i += 2;
        } else if SUBCOMMANDS.contains(&s.as_ref()) {
            return Some(i);
        } else {
            i += 1;
        }
    }
    None
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Flag tokens for one config object.
pub fn expand(config: &Value) -> Result<Vec<OsString>, UsageError> {
    let obj = config
        .as_object()
        .ok_or_else(|| UsageError("config file must hold a JSON object".into()))?;
    let mut out = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            return Err(UsageError("config files cannot include other config files".into()));
        }
        match value {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Option<Vec<_>>>().ok_or_else(|| {
                    UsageError(format!("config key `{key}`: arrays may hold only numbers and strings"))
                })?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            Value::Object(_) => return Err(UsageError(format!("config key `{key}`: nested objects are not flags"))),
            v => {
                out.push(flag.into());
                out.push(scalar(v).expect("scalar").into());
            }
        }
    }
    Ok(out)
}

/// `argv` with the referenced config file, if any, spliced in.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>, UsageError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text =
        std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
    let extra = expand(&value)?;
    let Some(pos) = subcommand_position(&argv) else {
        return Ok(argv);
    };
    let mut merged = argv[..=pos].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&argv[pos + 1..]);
    Ok(merged)
}
