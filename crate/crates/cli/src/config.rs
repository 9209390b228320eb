//! `--config FILE` support.
//!
//! A config file holds one `key = value` per line; `#` starts a comment and
//! blank lines are skipped. Each key is a long flag of the subcommand without
//! its dashes, so `epochs = 50` means `--epochs 50`. The pairs are spliced in
//! front of the command-line flags, and a flag given on the command line wins.

use std::fs;
use std::path::Path;

use crate::CliError;

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("{}:{}: expected key = value, got {raw:?}", path.display(), i + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.starts_with('-') || k == "config" {
            return Err(CliError::Config(format!("{}:{}: bad key {k:?}", path.display(), i + 1)));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Returns argv with the config file's flags inserted after the subcommand.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let pairs = parse_config(&text, path)?;
    // the subcommand is the first argument that is not a flag or a flag value
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if a == "--config" || a == "--threads" {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            sub = Some(i);
            break;
        }
    }
    let Some(sub) = sub else {
        return Ok(args);
    };
    let mut out = args[..=sub].to_vec();
    for (k, v) in pairs {
        out.push(format!("--{k}"));
        out.push(v);
    }
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}
