//! Fixture specs: `name:key=value,...` for built-ins, anything else is a file path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lvrep::TabularPomdp;

use crate::error::{read, BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FixtureSpec {
    Flip { eta: f64, horizon: usize },
    Lock { window: usize, code: usize, actions: usize },
    Gridmask { positions: usize, horizon: usize },
    File(PathBuf),
}

/// `(name, parameters with defaults, description)` for every built-in.
pub const BUILTINS: &[(&str, &str, &str)] = &[
    (
        "flip",
        "eta=1.0,horizon=3",
        "two states, stay/flip actions, observation correct with probability eta, reward = observation",
    ),
    (
        "lock",
        "window=2,code=3,actions=2",
        "combination lock whose failures stay hidden for window-1 steps; reward on opening",
    ),
    (
        "gridmask",
        "positions=4,horizon=5",
        "corridor with hidden velocity; observation is the position, reward at the far end",
    ),
];

fn params(name: &str, text: &str) -> Result<BTreeMap<String, String>> {
    let allowed: Vec<&str> = BUILTINS
        .iter()
        .find(|(n, ..)| *n == name)
        .map(|(_, p, _)| p.split(',').map(|kv| kv.split('=').next().unwrap_or("")).collect())
        .unwrap_or_default();
    let mut out = BTreeMap::new();
    for kv in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| BenchError::Fixture(format!("`{kv}` is not key=value")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(BenchError::Fixture(format!(
                "unknown parameter `{k}` for {name} (expected one of {})",
                allowed.join(", ")
            )));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn get<T: FromStr>(p: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| BenchError::Fixture(format!("invalid value `{v}` for `{key}`"))),
    }
}

impl FromStr for FixtureSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "flip" => {
                let p = params(name, rest)?;
                Ok(FixtureSpec::Flip {
                    eta: get(&p, "eta", 1.0)?,
                    horizon: get(&p, "horizon", 3)?,
                })
            }
            "lock" => {
                let p = params(name, rest)?;
                Ok(FixtureSpec::Lock {
                    window: get(&p, "window", 2)?,
                    code: get(&p, "code", 3)?,
                    actions: get(&p, "actions", 2)?,
                })
            }
            "gridmask" => {
                let p = params(name, rest)?;
                Ok(FixtureSpec::Gridmask {
                    positions: get(&p, "positions", 4)?,
                    horizon: get(&p, "horizon", 5)?,
                })
            }
            _ if s.ends_with(".toml") || s.contains('/') => Ok(FixtureSpec::File(PathBuf::from(s))),
            _ => Err(BenchError::Fixture(format!(
                "unknown fixture `{name}` (built-ins: flip, lock, gridmask; or a .toml path)"
            ))),
        }
    }
}

impl fmt::Display for FixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureSpec::Flip { eta, horizon } => write!(f, "flip:eta={eta},horizon={horizon}"),
            FixtureSpec::Lock {
                window,
                code,
                actions,
            } => write!(f, "lock:window={window},code={code},actions={actions}"),
            FixtureSpec::Gridmask { positions, horizon } => {
                write!(f, "gridmask:positions={positions},horizon={horizon}")
            }
            FixtureSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FixtureSpec {
    pub fn build(&self) -> Result<TabularPomdp> {
        Ok(match self {
            FixtureSpec::Flip { eta, horizon } => TabularPomdp::flip(*eta, *horizon)?,
            FixtureSpec::Lock {
                window,
                code,
                actions,
            } => TabularPomdp::lock_with_actions(*window, *code, *actions)?,
            FixtureSpec::Gridmask { positions, horizon } => {
                TabularPomdp::gridmask(*positions, *horizon)?
            }
            FixtureSpec::File(path) => TabularPomdp::from_text(&read(path)?)?,
        })
    }
}
