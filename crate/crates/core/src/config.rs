//! Run configuration: subcommand, typed parameters and seed, from argv and
//! an optional `key = value` file. Flags override the file.

use std::collections::BTreeMap;
use std::fmt;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::kv;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Exact,
    Simulate,
    Norms,
    Residual,
    Scenario,
    Dump,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Exact,
        Command::Simulate,
        Command::Norms,
        Command::Residual,
        Command::Scenario,
        Command::Dump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Simulate => "simulate",
            Command::Norms => "norms",
            Command::Residual => "residual",
            Command::Scenario => "scenario",
            Command::Dump => "dump",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    fn schema(self) -> Vec<Key> {
        use Kind::*;
        match self {
            Command::Exact => vec![
                Key::req("branch", Choice(&["prime", "tilde", "trunc1", "trunc2"])),
                Key::opt("i", Int),
                Key::req("t", Dyadic),
                Key::opt("level", Int),
                Key::def("window", Int, "1"),
            ],
            Command::Simulate => vec![
                Key::req("variant", Choice(&["1", "2"])),
                Key::req("i", Int),
                Key::req("j", Int),
                Key::req("h", Dyadic),
                Key::def("t-end", Dyadic, "2"),
                Key::def("window", Int, "1"),
                Key::def("cfl", Dyadic, "1/2"),
            ],
            Command::Norms => vec![
                Key::def("i", IntList, "1,2,3,4,5"),
                Key::def("s", Dyadic, "1/2"),
                Key::def("sigma", Dyadic, "3/4"),
                Key::def("samples", Int, "1000000"),
            ],
            Command::Residual => vec![
                Key::def("branch", Choice(&["prime", "tilde"]), "tilde"),
                Key::def("h", DyadicList, "2^-4,2^-5,2^-6"),
                Key::def("rules", Int, "4"),
            ],
            Command::Scenario => vec![
                Key::req("name", Choice(&["theorem2", "lifted"])),
                Key::def("i", IntList, "1,2,3"),
                Key::def("N", Int, "4"),
                Key::def("h", Dyadic, "2^-7"),
                Key::opt("target", Dyadic),
                Key::def("j-start", Int, "2"),
                Key::def("j-max", Int, "8"),
                Key::def("branch", Choice(&["prime", "tilde", "both"]), "both"),
                Key::def("t", DyadicList, "5/2"),
                Key::def("y0", DyadicList, "9/4"),
                Key::def("level", Int, "3"),
            ],
            Command::Dump => vec![
                Key::req("input", Path),
                Key::def("format", Choice(&["pgm", "csv", "summary"]), "summary"),
            ],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Int,
    IntList,
    Dyadic,
    DyadicList,
    Choice(&'static [&'static str]),
    Path,
}

#[derive(Clone, Copy, Debug)]
struct Key {
    name: &'static str,
    kind: Kind,
    required: bool,
    default: Option<&'static str>,
}

impl Key {
    const fn req(name: &'static str, kind: Kind) -> Key {
        Key { name, kind, required: true, default: None }
    }

    const fn opt(name: &'static str, kind: Kind) -> Key {
        Key { name, kind, required: false, default: None }
    }

    const fn def(name: &'static str, kind: Kind, default: &'static str) -> Key {
        Key { name, kind, required: false, default: Some(default) }
    }
}

/// A typed parameter value.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(u64),
    IntList(Vec<u64>),
    Dyadic(Dyadic),
    DyadicList(Vec<Dyadic>),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Dyadic(d) => write!(f, "{d}"),
            Value::Text(s) => f.write_str(s),
            Value::IntList(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            Value::DyadicList(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

fn parse_value(kind: Kind, raw: &str) -> std::result::Result<Value, String> {
    let int = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("`{s}` is not a nonnegative integer"))
    };
    let dy = |s: &str| s.trim().parse::<Dyadic>().map_err(|e| e.to_string());
    let list = |s: &str| -> Vec<String> { s.split(',').map(|p| p.trim().to_string()).collect() };
    match kind {
        Kind::Int => int(raw).map(Value::Int),
        Kind::Dyadic => dy(raw).map(Value::Dyadic),
        Kind::IntList => list(raw).iter().map(|s| int(s)).collect::<std::result::Result<_, _>>().map(Value::IntList),
        Kind::DyadicList => list(raw)
            .iter()
            .map(|s| dy(s))
            .collect::<std::result::Result<_, _>>()
            .map(Value::DyadicList),
        Kind::Choice(opts) => {
            if opts.contains(&raw.trim()) {
                Ok(Value::Text(raw.trim().to_string()))
            } else {
                Err(format!("`{raw}` is not one of {}", opts.join("|")))
            }
        }
        Kind::Path => {
            if raw.trim().is_empty() {
                Err("empty path".into())
            } else {
                Ok(Value::Text(raw.trim().to_string()))
            }
        }
    }
}

/// Parsed and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub command: Command,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    /// Output root; the `TNL_OUT` variable or `out` when unset.
    pub out: Option<String>,
}

impl Config {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.params.get(key)
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        match self.params.get(key) {
            Some(Value::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn dyadic(&self, key: &str) -> Option<Dyadic> {
        match self.params.get(key) {
            Some(Value::Dyadic(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.params.get(key) {
            Some(Value::Text(v)) => Some(v),
            _ => None,
        }
    }

    pub fn ints(&self, key: &str) -> Option<&[u64]> {
        match self.params.get(key) {
            Some(Value::IntList(v)) => Some(v),
            _ => None,
        }
    }

    pub fn dyadics(&self, key: &str) -> Option<&[Dyadic]> {
        match self.params.get(key) {
            Some(Value::DyadicList(v)) => Some(v),
            _ => None,
        }
    }

    /// Canonical argv form; [`parse_config`] maps it back to `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut out = vec![self.command.name().to_string()];
        for (k, v) in &self.params {
            out.push(format!("--{k}"));
            out.push(v.to_string());
        }
        out.push("--seed".into());
        out.push(self.seed.to_string());
        if let Some(o) = &self.out {
            out.push("--out".into());
            out.push(o.clone());
        }
        out
    }

    /// Canonical `key = value` text of the parameters and seed; the output
    /// directory is not part of it.
    pub fn canonical(&self) -> String {
        let mut entries: Vec<(&str, String)> = vec![("command", self.command.name().to_string())];
        for (k, v) in &self.params {
            entries.push((k, v.to_string()));
        }
        entries.push(("seed", self.seed.to_string()));
        kv::render(&entries)
    }
}

/// Parse `argv` (without the program name) and, when given, the contents
/// of a config file. Every problem found is reported in one
/// [`Error::Config`].
pub fn parse_config(argv: &[String], file: Option<&str>) -> Result<Config> {
    let mut errors = Vec::new();
    let mut it = argv.iter().peekable();
    let command = match it.next() {
        None => return Err(Error::Config(vec!["missing subcommand".into()])),
        Some(c) => match Command::parse(c) {
            Some(c) => c,
            None => {
                return Err(Error::Config(vec![format!(
                    "unknown subcommand `{c}`; expected one of {}",
                    Command::ALL.map(|c| c.name()).join("|")
                )]))
            }
        },
    };
    let schema = command.schema();
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    if command == Command::Scenario {
        if let Some(name) = it.next_if(|a| !a.starts_with("--")) {
            raw.insert("name".into(), name.clone());
        }
    }
    if let Some(text) = file {
        match kv::parse(text) {
            Ok(entries) => {
                for e in entries {
                    raw.insert(e.key, e.value);
                }
            }
            Err(e) => errors.push(format!("config file: {e}")),
        }
    }
    let mut flags: BTreeMap<String, String> = BTreeMap::new();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix("--") else {
            errors.push(format!("unexpected argument `{a}`"));
            continue;
        };
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (key.to_string(), it.next_if(|v| !v.starts_with("--")).cloned()),
        };
        let Some(value) = value else {
            errors.push(format!("flag --{key} needs a value"));
            continue;
        };
        if flags.insert(key.clone(), value).is_some() {
            errors.push(format!("flag --{key} given twice"));
        }
    }
    raw.extend(flags);
    let mut seed = 0;
    if let Some(s) = raw.remove("seed") {
        match s.trim().parse::<u64>() {
            Ok(v) => seed = v,
            Err(_) => errors.push(format!("seed: `{s}` is not a nonnegative integer")),
        }
    }
    let out = raw.remove("out");
    raw.remove("config");
    let mut params = BTreeMap::new();
    for key in &schema {
        match raw.remove(key.name) {
            Some(v) => match parse_value(key.kind, &v) {
                Ok(v) => {
                    params.insert(key.name.to_string(), v);
                }
                Err(e) => errors.push(format!("{}: {e}", key.name)),
            },
            None => {
                if let Some(d) = key.default {
                    params.insert(key.name.to_string(), parse_value(key.kind, d).expect("valid default"));
                } else if key.required {
                    errors.push(format!("missing required key `{}`", key.name));
                }
            }
        }
    }
    for k in raw.keys() {
        errors.push(format!("unknown key `{k}` for {command}"));
    }
    if errors.is_empty() {
        Ok(Config {
            command,
            params,
            seed,
            out,
        })
    } else {
        Err(Error::Config(errors))
    }
}

/// Value of `--config` in `argv`, if present.
pub fn config_path(argv: &[String]) -> Option<&str> {
    argv.iter().enumerate().find_map(|(k, a)| {
        if let Some(p) = a.strip_prefix("--config=") {
            Some(p)
        } else if a == "--config" {
            argv.get(k + 1).map(|s| s.as_str())
        } else {
            None
        }
    })
}
