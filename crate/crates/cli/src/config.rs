//! `--config FILE` support: `key = value` lines become `--key value`
//! arguments placed ahead of the real ones, so command-line flags win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses a config file into flag arguments.
pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<OsString>> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value, got {line:?}", origin.display(), i + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("{}:{}: invalid key {key:?}", origin.display(), i + 1);
        }
        args.push(OsString::from(format!("--{key}")));
        args.push(OsString::from(value.trim()));
    }
    Ok(args)
}

/// Expands `--config FILE` / `--config=FILE` found after the subcommand.
/// Returns the rewritten argument list.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config: Option<OsString> = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = Some(iter.next().context("--config needs a file")?);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let from_file = parse_config(&text, path)?;
    // Insert right after the subcommand (first positional argument).
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(rest.len());
    let mut out: Vec<OsString> = rest[..sub].to_vec();
    out.extend(from_file);
    out.extend_from_slice(&rest[sub..]);
    Ok(out)
}
