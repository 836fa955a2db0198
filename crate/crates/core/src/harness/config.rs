use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// `key = value` settings; keys are flag names without the leading dashes.
pub type ConfigFile = BTreeMap<String, String>;

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str, origin: &Path) -> Result<ConfigFile> {
    let mut out = ConfigFile::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(err(format!("empty key or value in `{line}`")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(format!("key `{k}` given twice")));
        }
    }
    Ok(out)
}
