use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Removes `--config <file>` from `argv` and appends every key of the file's
/// JSON object as a flag, unless that flag is already on the command line.
///
/// Keys use flag spelling with `_` or `-`; `true` becomes a bare switch,
/// `false` and `null` are skipped, arrays are joined with commas.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut args = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut iter = argv.into_iter();
    while let Some(a) = iter.next() {
        match a.to_str() {
            Some("--config") => config = Some(iter.next().context("--config needs a file")?),
            Some(s) if s.starts_with("--config=") => config = Some(OsString::from(&s["--config=".len()..])),
            _ => args.push(a),
        }
    }
    let Some(path) = config else { return Ok(args) };
    for (flag, value) in config_flags(Path::new(&path))? {
        let present = args.iter().any(|a| a.to_str().is_some_and(|s| s == flag || s.starts_with(&format!("{flag}="))));
        if present {
            continue;
        }
        args.push(flag.into());
        if let Some(v) = value {
            args.push(v.into());
        }
    }
    Ok(args)
}

fn config_flags(path: &Path) -> Result<Vec<(String, Option<String>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let json: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let Value::Object(map) = json else { bail!("config {} is not a JSON object", path.display()) };
    let mut flags = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            other => bail!("config key {key:?}: unsupported value {other}"),
        };
        match &value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => flags.push((flag, None)),
            Value::Array(items) => {
                let joined = items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(",");
                flags.push((flag, Some(joined)));
            }
            v => flags.push((flag, Some(scalar(v)?))),
        }
    }
    Ok(flags)
}
