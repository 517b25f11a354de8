//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every
//! key is listed in [`SCHEMA`] with its type; unknown keys, duplicate keys
//! and values that do not parse are rejected when the file is read. Values
//! are stored in canonical form so that equivalent spellings hash alike.
//!
//! ```text
//! # regularity on the corner domain
//! n = 2
//! p = 4
//! domain = box-minus-cone(-0.5,-0.5;0.5,0.5;0,0;0,-1;pi/4)
//! y = 0,0
//! delta = 0.3
//! delta0 = 0.04,0.02,0.01
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use tugwar_core::domain::{parse_coordinates, Domain};
use tugwar_core::strategy::ROSTER_NAMES;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Nonnegative integer.
    Int,
    Float,
    /// Comma-separated floats; a single float is a list of length one.
    Floats,
    /// Comma-separated coordinates.
    Point,
    Domain,
    /// A Player 1 or Player 2 strategy name.
    Strategy,
    /// Comma-separated roster adversary names.
    Adversaries,
    /// Free text (paths, selectors).
    Text,
}

pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    pub doc: &'static str,
    /// Output-only keys do not change results and are left out of the hash.
    pub hashed: bool,
}

const fn key(key: &'static str, kind: Kind, doc: &'static str) -> KeySpec {
    KeySpec {
        key,
        kind,
        doc,
        hashed: true,
    }
}

const fn output(key: &'static str, kind: Kind, doc: &'static str) -> KeySpec {
    KeySpec {
        key,
        kind,
        doc,
        hashed: false,
    }
}

pub const SCHEMA: &[KeySpec] = &[
    key(
        "experiment",
        Kind::Text,
        "experiment run at each level of a ladder",
    ),
    key("metric", Kind::Text, "metric tracked by a ladder"),
    key(
        "trend",
        Kind::Text,
        "expected ladder trend: nondecreasing, nonincreasing or stable",
    ),
    key("n", Kind::Int, "dimension"),
    key("p", Kind::Float, "exponent p > 2"),
    key("eps", Kind::Float, "step length"),
    key(
        "alpha",
        Kind::Float,
        "diagnostic override of the tug probability",
    ),
    key(
        "domain",
        Kind::Domain,
        "domain descriptor, e.g. ball(0,0;1)",
    ),
    key("x0", Kind::Point, "starting point"),
    key("y", Kind::Point, "boundary point"),
    key(
        "direction",
        Kind::Point,
        "direction from y towards the starting points",
    ),
    key("strategy1", Kind::Strategy, "Player 1 strategy"),
    key("strategy2", Kind::Strategy, "Player 2 strategy"),
    key("adversaries", Kind::Adversaries, "Player 2 roster subset"),
    key(
        "fraction",
        Kind::Float,
        "step of pull-type strategies as a fraction of eps",
    ),
    key(
        "payoff",
        Kind::Text,
        "constant:C, linear, right-exit or radial-p-harmonic",
    ),
    key("delta", Kind::Float, "radius of the target ball around y"),
    key(
        "delta0",
        Kind::Floats,
        "distances of the starting points from y",
    ),
    key(
        "lambda",
        Kind::Float,
        "start height factor of the cylinder estimate",
    ),
    key("a", Kind::Float, "clock window scale"),
    key("d", Kind::Float, "vertical ceiling scale"),
    key("r", Kind::Float, "cylinder radius and height"),
    key("t0", Kind::Floats, "cylinder start heights"),
    key("k", Kind::Int, "number of summands"),
    key("x", Kind::Float, "evaluation point"),
    key("radius", Kind::Float, "evaluation radius"),
    key(
        "radii",
        Kind::Floats,
        "radii of the measure density estimate",
    ),
    key("tol", Kind::Float, "absolute accuracy target"),
    key("samples", Kind::Int, "Monte Carlo samples"),
    key("bins", Kind::Int, "histogram bins"),
    key("cstar", Kind::Float, "C* of the density lower bound"),
    key(
        "c_density",
        Kind::Float,
        "measure density constant of the domain",
    ),
    key(
        "c_np",
        Kind::Float,
        "bottom-exit constant; measured when absent",
    ),
    key("h", Kind::Float, "grid spacing"),
    key("N", Kind::Int, "number of steps"),
    key("b", Kind::Float, "bound on the summands"),
    key("l", Kind::Float, "tail level"),
    key("m", Kind::Float, "range of the sine inequality"),
    key("max_steps", Kind::Int, "episode horizon"),
    key("max_iters", Kind::Int, "value iteration limit"),
    key("episodes", Kind::Int, "Monte Carlo episodes"),
    key("seed", Kind::Int, "master seed"),
    key("eps_ladder", Kind::Floats, "step lengths of a ladder"),
    output("out", Kind::Text, "append result records to this file"),
    output("format", Kind::Text, "record format: jsonl or csv"),
    output("threads", Kind::Int, "worker threads"),
    output(
        "audit",
        Kind::Text,
        "write the stream audit of the first cylinder run here",
    ),
    output("profile", Kind::Text, "write the density profile CSV here"),
    output("field", Kind::Text, "write the value field CSV here"),
    output("trace", Kind::Text, "write the episode positions CSV here"),
];

pub fn spec(key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.key == key)
}

fn invalid(key: &str, raw: &str, why: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("`{key} = {raw}`: {why}"))
}

fn floats(raw: &str) -> Result<Vec<f64>, String> {
    parse_coordinates(raw).map_err(|e| e.to_string())
}

pub fn is_strategy_name(name: &str) -> bool {
    matches!(name, "idle" | "cancellation")
        || ROSTER_NAMES.contains(&name)
        || name
            .strip_prefix("pull:")
            .is_some_and(|p| parse_coordinates(p).is_ok())
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Checks `raw` against the key's type and returns the canonical spelling.
fn canonical(key: &str, raw: &str) -> Result<String, HarnessError> {
    let spec = spec(key).ok_or_else(|| HarnessError::Config(format!("unknown key `{key}`")))?;
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(invalid(key, raw, "empty value"));
    }
    Ok(match spec.kind {
        Kind::Int => raw
            .parse::<u64>()
            .map_err(|e| invalid(key, raw, e))?
            .to_string(),
        Kind::Float => match floats(raw).map_err(|e| invalid(key, raw, e))?.as_slice() {
            [x] if x.is_finite() => x.to_string(),
            _ => return Err(invalid(key, raw, "expected one finite number")),
        },
        Kind::Floats | Kind::Point => {
            let v = floats(raw).map_err(|e| invalid(key, raw, e))?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(key, raw, "non-finite number"));
            }
            join(&v)
        }
        Kind::Domain => raw
            .parse::<Domain>()
            .map_err(|e| invalid(key, raw, e))?
            .to_string(),
        Kind::Strategy => {
            if !is_strategy_name(raw) {
                return Err(invalid(
                    key,
                    raw,
                    format!("unknown strategy; use idle, cancellation, pull:<point> or one of {ROSTER_NAMES:?}"),
                ));
            }
            raw.to_string()
        }
        Kind::Adversaries => {
            let names: Vec<&str> = raw.split(',').map(str::trim).collect();
            if let Some(bad) = names.iter().find(|n| !ROSTER_NAMES.contains(n)) {
                return Err(invalid(
                    key,
                    raw,
                    format!("`{bad}` is not in the roster {ROSTER_NAMES:?}"),
                ));
            }
            names.join(",")
        }
        Kind::Text => raw.to_string(),
    })
}

/// Validated key-value configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            let k = k.trim();
            if cfg.values.contains_key(k) {
                return Err(HarnessError::Config(format!(
                    "line {}: duplicate key `{k}`",
                    i + 1
                )));
            }
            cfg.set(k, v)
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    /// Sets or overrides a key.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), HarnessError> {
        let v = canonical(key, raw)?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    pub fn with(mut self, key: &str, raw: &str) -> Result<Self, HarnessError> {
        self.set(key, raw)?;
        Ok(self)
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text form, one `key = value` per line in key order.
    pub fn to_text(&self) -> String {
        self.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 over the experiment id and every result-affecting key, hex
    /// encoded. Output-only keys (`out`, `format`, `threads`, ...) are
    /// excluded, so the hash identifies the computation rather than where
    /// its records go.
    pub fn hash(&self, experiment_id: &str) -> String {
        let mut h = Sha256::new();
        h.update(experiment_id.as_bytes());
        h.update(b"\n");
        for (k, v) in self.iter() {
            if spec(k).is_some_and(|s| s.hashed) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn missing(key: &str) -> HarnessError {
        HarnessError::Config(format!("missing required key `{key}`"))
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.raw(key)
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        self.raw(key).map(|v| v.parse().expect("validated integer"))
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        self.raw(key).map(|v| v.parse().expect("validated float"))
    }

    pub fn floats(&self, key: &str) -> Option<Vec<f64>> {
        self.raw(key).map(|v| {
            v.split(',')
                .map(|x| x.parse().expect("validated float"))
                .collect()
        })
    }

    pub fn domain(&self, key: &str) -> Option<Domain> {
        self.raw(key).map(|v| v.parse().expect("validated domain"))
    }

    pub fn require_int(&self, key: &str) -> Result<u64, HarnessError> {
        self.int(key).ok_or_else(|| Self::missing(key))
    }

    pub fn require_float(&self, key: &str) -> Result<f64, HarnessError> {
        self.float(key).ok_or_else(|| Self::missing(key))
    }

    pub fn require_floats(&self, key: &str) -> Result<Vec<f64>, HarnessError> {
        self.floats(key).ok_or_else(|| Self::missing(key))
    }

    pub fn require_domain(&self, key: &str) -> Result<Domain, HarnessError> {
        self.domain(key).ok_or_else(|| Self::missing(key))
    }

    pub fn require_text(&self, key: &str) -> Result<&str, HarnessError> {
        self.text(key).ok_or_else(|| Self::missing(key))
    }

    /// A point key whose dimension must be `n`.
    pub fn point(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>, HarnessError> {
        match self.floats(key) {
            Some(p) if p.len() != n => Err(HarnessError::Config(format!(
                "`{key}` has {} coordinates, expected {n}",
                p.len()
            ))),
            other => Ok(other),
        }
    }

    pub fn require_point(&self, key: &str, n: usize) -> Result<Vec<f64>, HarnessError> {
        self.point(key, n)?.ok_or_else(|| Self::missing(key))
    }

    /// Single-valued access to a list key.
    pub fn single_float(&self, key: &str) -> Result<Option<f64>, HarnessError> {
        match self.floats(key).as_deref() {
            None => Ok(None),
            Some([x]) => Ok(Some(*x)),
            Some(_) => Err(HarnessError::Config(format!(
                "`{key}` must be a single value here"
            ))),
        }
    }
}
