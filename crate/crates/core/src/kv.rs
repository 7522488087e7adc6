//! Minimal `key = value` documents used for field specs and run configs.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parse a document of `key = value` lines. Blank lines and lines starting
/// with `#` are skipped; duplicate keys are an error.
pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = k.trim();
        let value = v.trim();
        if key.is_empty()
            || !key
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("invalid key `{key}`"),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn render(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}
