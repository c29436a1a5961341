//! Config files: either flat `key=value` lines whose keys are flag names, or a
//! run manifest whose `params` are replayed. Either way the entries become
//! flags placed before the user's own, so explicit flags win.

use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

/// Path given via `--config` after the subcommand, if any.
pub fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(2);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Inserts the config entries right after the subcommand name.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let command = args.get(1).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tokens = config_tokens(&text, &command).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = args;
    let tail = out.split_off(2);
    out.extend(tokens.into_iter().map(OsString::from));
    out.extend(tail);
    Ok(out)
}

pub fn config_tokens(text: &str, command: &str) -> Result<Vec<String>, String> {
    if text.trim_start().starts_with('{') {
        manifest_tokens(text, command)
    } else {
        flat_tokens(text)
    }
}

fn flag(key: &str) -> String {
    let key = key.trim().trim_start_matches('-');
    format!("--{}", if key.len() == 1 { key.to_owned() } else { key.replace('_', "-") })
}

fn push_entry(tokens: &mut Vec<String>, key: &str, value: &str) {
    match value {
        "true" => tokens.push(flag(key)),
        "false" => {}
        v => {
            tokens.push(flag(key));
            tokens.push(v.to_owned());
        }
    }
}

fn flat_tokens(text: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        if key.trim().is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        push_entry(&mut tokens, key, value.trim());
    }
    Ok(tokens)
}

fn manifest_tokens(text: &str, command: &str) -> Result<Vec<String>, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("invalid manifest JSON: {e}"))?;
    let recorded = v.get("command").and_then(Value::as_str).ok_or("manifest has no `command`")?;
    if recorded != command {
        return Err(format!("manifest was written by `{recorded}`, not `{command}`"));
    }
    let params = v.get("params").and_then(Value::as_object).ok_or("manifest has no `params` object")?;
    let mut tokens = Vec::new();
    for (key, value) in params {
        let text = match value {
            Value::Null => continue,
            Value::Bool(b) => b.to_string(),
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            Value::Array(items) => items.iter().map(|x| x.to_string().trim_matches('"').to_owned()).collect::<Vec<_>>().join(","),
            Value::Object(_) => return Err(format!("parameter `{key}` is an object")),
        };
        push_entry(&mut tokens, key, &text);
    }
    Ok(tokens)
}
