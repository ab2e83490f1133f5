//! `--config FILE` support: `key = value` lines that act as defaults for
//! the subcommand's long flags. Flags given on the command line win.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// underscores in keys are accepted in place of dashes.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", n + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("config line {}: invalid key {:?}", n + 1, key);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Finds the value of `--config` in `argv`, in either `--config F` or
/// `--config=F` form.
pub fn find_config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Inserts the config entries as flags right after the subcommand token so
/// that any later occurrence on the real command line overrides them.
pub fn merge(argv: Vec<String>, subcommands: &[&str], path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text)?;
    let Some(pos) = argv.iter().skip(1).position(|a| subcommands.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let at = pos + 2;
    let mut merged = argv[..at].to_vec();
    for (k, v) in entries {
        merged.push(format!("--{k}"));
        merged.push(v);
    }
    merged.extend_from_slice(&argv[at..]);
    Ok(merged)
}
