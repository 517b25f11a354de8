//! The `tugwar` command line.
//!
//! Every subcommand flag is a config key (`--max-steps` sets `max_steps`),
//! so a run can be described by a config file, by flags, or both; flags win.
//! Human-readable results go to standard output, result records are appended
//! to `--out` in the `--format` of choice.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 on numerical or
//! convergence failures, 3 when truncated runs outnumber completed ones.

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::config::{self, Config};
use crate::experiments;
use crate::record::{self, Format, ResultRecord};
use crate::HarnessError;

const GAME: &[&str] = &[
    "n",
    "p",
    "eps",
    "alpha",
    "domain",
    "x0",
    "y",
    "strategy1",
    "strategy2",
    "payoff",
    "fraction",
    "max_steps",
];
const CYLINDER: &[&str] = &["n", "p", "r", "eps", "t0", "alpha", "max_steps", "audit"];

/// Keys settable through global flags.
const GLOBAL: &[&str] = &["seed", "episodes", "out", "threads", "format"];

struct Leaf {
    path: &'static [&'static str],
    about: &'static str,
    keys: &'static [&'static str],
}

const GROUPS: &[(&str, &str)] = &[
    ("cylinder", "Cylinder walk experiments"),
    ("density", "Densities of sums of uniform steps in a ball"),
    ("bounds", "Concentration bounds and explicit constants"),
    ("dpp", "Grid value iteration"),
];

const LEAVES: &[Leaf] = &[
    Leaf {
        path: &["probabilities"],
        about: "Tug and noise probabilities alpha and beta",
        keys: &["n", "p"],
    },
    Leaf {
        path: &["play"],
        about: "Play one episode",
        keys: &[
            "n",
            "p",
            "eps",
            "alpha",
            "domain",
            "x0",
            "y",
            "strategy1",
            "strategy2",
            "payoff",
            "fraction",
            "max_steps",
            "trace",
        ],
    },
    Leaf {
        path: &["value"],
        about: "Monte Carlo value of a strategy pair",
        keys: GAME,
    },
    Leaf {
        path: &["cylinder", "bottom"],
        about: "Bottom-exit probability and its constant",
        keys: CYLINDER,
    },
    Leaf {
        path: &["cylinder", "clock"],
        about: "Horizontal-move window of the clock",
        keys: &[
            "n",
            "p",
            "r",
            "eps",
            "t0",
            "alpha",
            "max_steps",
            "audit",
            "a",
        ],
    },
    Leaf {
        path: &["cylinder", "eventb"],
        about: "Clock concentration event",
        keys: CYLINDER,
    },
    Leaf {
        path: &["cylinder", "theorem3"],
        about: "Bad-event probability of the cylinder estimate",
        keys: &[
            "n",
            "p",
            "eps",
            "domain",
            "y",
            "delta",
            "lambda",
            "c_density",
            "c_np",
            "cstar",
            "t0",
            "max_steps",
        ],
    },
    Leaf {
        path: &["density", "exact"],
        about: "Exact one-dimensional density",
        keys: &["k", "eps", "x"],
    },
    Leaf {
        path: &["density", "inversion"],
        about: "Density by Fourier inversion",
        keys: &["n", "k", "eps", "radius", "tol"],
    },
    Leaf {
        path: &["density", "mc"],
        about: "Monte Carlo radial density profile",
        keys: &["n", "k", "eps", "samples", "bins", "profile"],
    },
    Leaf {
        path: &["density", "bounds"],
        about: "Upper and lower density bounds",
        keys: &["n", "k", "eps", "cstar", "samples"],
    },
    Leaf {
        path: &["density", "constants"],
        about: "Constants of the density bounds",
        keys: &["n"],
    },
    Leaf {
        path: &["bounds", "hoeffding"],
        about: "Maximal Hoeffding bound",
        keys: &["N", "b", "n", "lambda"],
    },
    Leaf {
        path: &["bounds", "tail"],
        about: "Two-sided Gaussian tail",
        keys: &["l"],
    },
    Leaf {
        path: &["bounds", "reflection"],
        about: "Exact reflection identity",
        keys: &["N", "l"],
    },
    Leaf {
        path: &["bounds", "sin"],
        about: "Sine inequality scan",
        keys: &["m"],
    },
    Leaf {
        path: &["bounds", "constants"],
        about: "Constants of the cylinder estimate",
        keys: &["n", "p", "c_density", "c_np", "cstar"],
    },
    Leaf {
        path: &["bounds", "clock"],
        about: "Explicit parts of the clock estimates",
        keys: &["n", "p", "r", "t0", "eps", "a", "d"],
    },
    Leaf {
        path: &["dpp", "solve"],
        about: "Value iteration for the dynamic programming principle",
        keys: &[
            "n",
            "p",
            "eps",
            "alpha",
            "domain",
            "payoff",
            "h",
            "tol",
            "max_iters",
            "x0",
            "field",
        ],
    },
    Leaf {
        path: &["dpp", "compare"],
        about: "Monte Carlo value against the grid value",
        keys: &["n", "p", "eps", "alpha", "domain", "payoff", "h", "x0"],
    },
    Leaf {
        path: &["regularity"],
        about: "Cancellation strategy against the adversary roster",
        keys: &[
            "n",
            "p",
            "eps",
            "alpha",
            "domain",
            "y",
            "direction",
            "delta",
            "delta0",
            "adversaries",
            "fraction",
            "radii",
            "samples",
            "max_steps",
            "c_np",
            "cstar",
        ],
    },
    Leaf {
        path: &["ladder"],
        about: "Refinement ladder over eps",
        keys: &[],
    },
];

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn key_arg(key: &'static str) -> Arg {
    let spec = config::spec(key).expect("schema key");
    Arg::new(key)
        .long(flag(key))
        .value_name("VALUE")
        .help(spec.doc)
        .action(ArgAction::Set)
}

fn leaf_keys(leaf: &Leaf) -> Vec<&'static str> {
    if leaf.keys.is_empty() {
        // The ladder forwards every key to the experiment it runs.
        config::SCHEMA
            .iter()
            .map(|s| s.key)
            .filter(|k| !GLOBAL.contains(k))
            .collect()
    } else {
        leaf.keys.to_vec()
    }
}

fn leaf_command(leaf: &Leaf) -> Command {
    let name = *leaf.path.last().expect("non-empty path");
    Command::new(name)
        .about(leaf.about)
        .args(leaf_keys(leaf).into_iter().map(key_arg))
}

pub fn command() -> Command {
    let mut root = Command::new("tugwar")
        .about("Tug-of-war with noise: simulations, densities, bounds and value iteration")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("flat key = value configuration file")
                .global(true),
        )
        .arg(
            Arg::new("timing")
                .long("timing")
                .help("record wall time")
                .action(ArgAction::SetTrue)
                .global(true),
        );
    for key in GLOBAL {
        root = root.arg(key_arg(key).global(true));
    }
    let mut groups: Vec<(&str, Command)> = Vec::new();
    for leaf in LEAVES {
        match leaf.path {
            [_] => root = root.subcommand(leaf_command(leaf)),
            [group, _] => {
                if let Some((_, cmd)) = groups.iter_mut().find(|(g, _)| g == group) {
                    *cmd = std::mem::take(cmd).subcommand(leaf_command(leaf));
                } else {
                    let about = GROUPS
                        .iter()
                        .find(|(g, _)| g == group)
                        .map_or("", |(_, a)| a);
                    let cmd = Command::new(*group)
                        .about(about)
                        .subcommand_required(true)
                        .subcommand(leaf_command(leaf));
                    groups.push((group, cmd));
                }
            }
            _ => unreachable!("paths have one or two parts"),
        }
    }
    for (_, cmd) in groups {
        root = root.subcommand(cmd);
    }
    root
}

/// Resolves the chosen leaf: its experiment id, its matches and its keys.
fn leaf_of(m: &ArgMatches) -> (String, &ArgMatches, Vec<&'static str>) {
    let (first, sub) = m.subcommand().expect("subcommand required");
    let (path, matches): (Vec<&str>, &ArgMatches) = match sub.subcommand() {
        Some((second, leaf)) => (vec![first, second], leaf),
        None => (vec![first], sub),
    };
    let leaf = LEAVES
        .iter()
        .find(|l| l.path == path.as_slice())
        .expect("known leaf");
    (path.join("-"), matches, leaf_keys(leaf))
}

fn build_config(leaf: &ArgMatches, keys: &[&str]) -> Result<Config, HarnessError> {
    let mut cfg = match leaf.get_one::<String>("config") {
        Some(path) => Config::load(Path::new(path))?,
        None => Config::default(),
    };
    for key in GLOBAL {
        if let Some(v) = leaf.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    for key in keys {
        if let Some(v) = leaf.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn execute(
    m: &ArgMatches,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, HarnessError> {
    let (id, leaf, keys) = leaf_of(m);
    let cfg = build_config(leaf, &keys)?;
    let format: Format = cfg.text("format").unwrap_or("jsonl").parse()?;
    let start = Instant::now();
    let report = match cfg.int("threads") {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(|| experiments::run(&id, &cfg))?,
        None => experiments::run(&id, &cfg)?,
    };
    let seconds = leaf
        .get_flag("timing")
        .then(|| start.elapsed().as_secs_f64());
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    for line in &report.lines {
        writeln!(stdout, "{line}").map_err(io)?;
    }
    if let Some(out) = cfg.text("out") {
        let hash = cfg.hash(&id);
        let records: Vec<ResultRecord> = report
            .metrics
            .iter()
            .map(|m| ResultRecord::new(&id, &hash, m.clone(), seconds))
            .collect();
        record::append(Path::new(out), &records, format)?;
    }
    if let Some(m) = report.metrics.iter().find(|m| m.truncation_dominated()) {
        writeln!(
            stderr,
            "error: `{}`: truncated runs outnumber completed ones",
            m.name
        )
        .map_err(io)?;
        return Ok(3);
    }
    Ok(0)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(&matches, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn every_leaf_key_is_in_the_schema() {
        for leaf in LEAVES {
            for key in leaf_keys(leaf) {
                assert!(config::spec(key).is_some(), "{key}");
                assert!(!GLOBAL.contains(&key), "{key} duplicates a global flag");
            }
            let id = leaf.path.join("-");
            assert!(experiments::EXPERIMENTS.contains(&id.as_str()), "{id}");
        }
    }
}
