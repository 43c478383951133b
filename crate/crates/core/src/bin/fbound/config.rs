//! `--config <file>`: a flat TOML table whose keys are long flag names.
//!
//! Entries whose flag is absent from the command line are appended as flags;
//! the rest are dropped, so explicit flags win.

use std::fs;

use toml::Value;

pub fn expand(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some((pos, path, width)) = find_config(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let table: toml::Table = text.parse().map_err(|e| format!("config {path} is not valid TOML: {e}"))?;
    let mut injected = Vec::new();
    for (key, value) in &table {
        let flag = format!("--{key}");
        if key == "config" {
            return Err(format!("config {path} may not name another config"));
        }
        let given = argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        match value {
            Value::Boolean(true) => injected.push(flag),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                let parts: Result<Vec<String>, String> = items.iter().map(|v| scalar(key, v)).collect();
                injected.push(flag);
                injected.push(parts?.join(","));
            }
            other => {
                injected.push(flag);
                injected.push(scalar(key, other)?);
            }
        }
    }
    let mut out = argv;
    out.drain(pos..pos + width);
    out.extend(injected);
    Ok(out)
}

fn scalar(key: &str, v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(format!("config key `{key}` must be a scalar or a list of scalars")),
    }
}

fn find_config(argv: &[String]) -> Option<(usize, String, usize)> {
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            return argv.get(i + 1).map(|p| (i, p.clone(), 2));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some((i, p.to_string(), 1));
        }
    }
    None
}
