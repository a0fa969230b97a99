//! `key = value` config files merged into the argument list. Keys are long
//! flag names (`_` and `-` are interchangeable); flags given on the command
//! line win over the file.

use std::fs;

use crate::CliError;

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split('=').next().unwrap_or(name))
}

/// Expands `--config FILE` (or `--config=FILE`) into explicit flags.
pub fn expand(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut out = Vec::with_capacity(args.len());
    let mut config_path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            config_path = Some(
                iter.next()
                    .ok_or_else(|| CliError::Usage("--config needs a file path".into()))?,
            );
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(path.to_string());
        } else {
            out.push(arg);
        }
    }
    let Some(path) = config_path else {
        return Ok(out);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let present: Vec<String> = out.iter().filter_map(|a| flag_name(a)).map(str::to_string).collect();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{path}:{}: expected `key = value`", no + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(CliError::Usage(format!("{path}:{}: empty key", no + 1)));
        }
        if present.contains(&key) {
            continue;
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}
