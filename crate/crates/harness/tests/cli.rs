use std::collections::HashSet;
use std::path::Path;
use std::process::Command;

use tugwar_harness::cli;
use tugwar_harness::config::Config;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tugwar").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

const VALUE: &[&str] = &[
    "value",
    "--n",
    "1",
    "--p",
    "4",
    "--eps",
    "0.05",
    "--domain",
    "interval(0;1)",
    "--x0",
    "0.3",
    "--strategy1",
    "pull:1",
    "--strategy2",
    "pull:0",
    "--payoff",
    "right-exit",
];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn documented_examples() {
    assert_eq!(
        ok(&["probabilities", "--n", "2", "--p", "4"]),
        "alpha=0.3333333333333333\nbeta=0.6666666666666666\n"
    );
    assert_eq!(
        ok(&["bounds", "reflection", "--N", "2", "--l", "1"]),
        "lhs=1/2 rhs=1/2 equal=true\n"
    );
    assert_eq!(
        ok(&["density", "exact", "--k", "2", "--eps", "1", "--x", "0"]),
        "0.5\n"
    );
}

#[test]
fn exit_status_by_error_class() {
    let (code, _, err) = run(&["probabilities", "--n", "2", "--p", "4", "--frob", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage:"), "{err}");
    assert_eq!(run(&["bogus"]).0, 1);
    assert_eq!(run(&["probabilities", "--n", "2", "--p", "1"]).0, 1);
    assert_eq!(run(&["probabilities", "--n", "two", "--p", "4"]).0, 1);
    assert_eq!(run(&["probabilities", "--p", "4"]).0, 1);
    assert_eq!(
        run(&[
            "density",
            "inversion",
            "--n",
            "1",
            "--k",
            "2",
            "--eps",
            "1",
            "--radius",
            "0",
            "--tol",
            "1e-8"
        ])
        .0,
        2
    );
    let dpp = [
        "dpp",
        "solve",
        "--n",
        "1",
        "--p",
        "4",
        "--eps",
        "0.05",
        "--h",
        "0.0125",
        "--domain",
        "interval(0;1)",
        "--payoff",
        "right-exit",
        "--max-iters",
        "3",
    ];
    assert_eq!(run(&dpp).0, 2);
    let (code, _, err) = run(&with(VALUE, &["--max-steps", "10", "--episodes", "10"]));
    assert_eq!(code, 3, "{err}");
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("probabilities") && out.contains("regularity"));
}

#[test]
fn process_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_tugwar");
    let s = Command::new(bin)
        .args(["probabilities", "--n", "2", "--p", "4"])
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&s.stdout),
        "alpha=0.3333333333333333\nbeta=0.6666666666666666\n"
    );
    let s = Command::new(bin)
        .args(["probabilities", "--nope"])
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&s.stderr).contains("Usage:"));
    assert!(s.stdout.is_empty());
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn jsonl_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3", "8"] {
        let path = dir.path().join(format!("t{threads}.jsonl"));
        let p = path.to_str().unwrap();
        ok(&with(
            VALUE,
            &[
                "--episodes",
                "3000",
                "--seed",
                "5",
                "--threads",
                threads,
                "--out",
                p,
            ],
        ));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    assert!(text.contains("\"seconds\":null"), "{text}");
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in [
            "experiment_id",
            "config_hash",
            "metric",
            "value",
            "std_error",
            "episodes",
            "truncated",
            "seconds",
        ] {
            assert!(v.get(key).is_some(), "{key} missing from {line}");
        }
        assert_eq!(v["experiment_id"], "value");
    }
}

#[test]
fn seeds_change_the_records() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&with(
        VALUE,
        &[
            "--episodes",
            "2000",
            "--seed",
            "1",
            "--out",
            a.to_str().unwrap(),
        ],
    ));
    ok(&with(
        VALUE,
        &[
            "--episodes",
            "2000",
            "--seed",
            "2",
            "--out",
            b.to_str().unwrap(),
        ],
    ));
    assert_ne!(read(&a), read(&b));
}

#[test]
fn timing_fills_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    ok(&with(
        VALUE,
        &[
            "--episodes",
            "200",
            "--timing",
            "--out",
            path.to_str().unwrap(),
        ],
    ));
    let v: serde_json::Value = serde_json::from_str(read(&path).lines().next().unwrap()).unwrap();
    assert!(v["seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("value.cfg");
    std::fs::write(
        &cfg,
        "# right-exit probability\nn = 1\np = 4.0\neps = 5e-2\ndomain = interval(0;1)\nx0 = 0.3\n\
         strategy1 = pull:1\nstrategy2 = pull:0\npayoff = right-exit\nepisodes = 1500\n",
    )
    .unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&[
        "value",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    ok(&with(
        VALUE,
        &["--episodes", "1500", "--out", b.to_str().unwrap()],
    ));
    assert_eq!(read(&a), read(&b));
    // Flags override the file.
    let c = dir.path().join("c.jsonl");
    ok(&[
        "value",
        "--config",
        cfg.to_str().unwrap(),
        "--x0",
        "0.7",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_ne!(read(&a), read(&c));
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(run(&["value", "--config", cfg.to_str().unwrap()]).0, 1);
}

#[test]
fn csv_output_has_one_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let p = path.to_str().unwrap();
    for _ in 0..2 {
        ok(&[
            "bounds", "tail", "--l", "1.96", "--format", "csv", "--out", p,
        ]);
    }
    let text = read(&path);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("experiment_id,config_hash,metric,value"));
    assert_eq!(lines[1], lines[2]);
    assert_eq!(
        run(&["bounds", "tail", "--l", "1", "--format", "xml", "--out", p]).0,
        1
    );
}

#[test]
fn appended_records_leave_earlier_bytes_alone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    let p = path.to_str().unwrap();
    ok(&["probabilities", "--n", "2", "--p", "4", "--out", p]);
    let before = std::fs::read(&path).unwrap();
    ok(&["bounds", "sin", "--m", "pi", "--out", p]);
    let after = std::fs::read(&path).unwrap();
    assert!(after.len() > before.len());
    assert_eq!(&after[..before.len()], &before[..]);
}

#[test]
fn config_hashes_are_distinct_over_a_corpus() {
    let mut seen = HashSet::new();
    let mut count = 0;
    for n in 1..=3 {
        for p in ["2.5", "3", "4", "10"] {
            for eps in ["0.1", "0.05", "0.01", "0.005", "0.0025"] {
                for seed in 0..5 {
                    for id in ["value", "cylinder-bottom", "dpp-solve"] {
                        let cfg = Config::default()
                            .with("n", &n.to_string())
                            .unwrap()
                            .with("p", p)
                            .unwrap()
                            .with("eps", eps)
                            .unwrap()
                            .with("seed", &seed.to_string())
                            .unwrap();
                        seen.insert(cfg.hash(id));
                        count += 1;
                    }
                }
            }
        }
    }
    assert_eq!(seen.len(), count);
    let a = Config::parse("eps = 0.01\np = 4")
        .unwrap()
        .with("out", "x.jsonl")
        .unwrap();
    let b = Config::parse("p = 4.0\neps = 1e-2")
        .unwrap()
        .with("threads", "2")
        .unwrap();
    assert_eq!(a.hash("value"), b.hash("value"));
    assert_eq!(a.hash("value").len(), 64);
}

#[test]
fn ladder_reports_a_trend() {
    let out = ok(&[
        "ladder",
        "--experiment",
        "cylinder-eventb",
        "--n",
        "2",
        "--p",
        "4",
        "--r",
        "1",
        "--t0",
        "0.5",
        "--eps-ladder",
        "0.08,0.04,0.02",
        "--episodes",
        "400",
    ]);
    assert!(
        out.contains("prob_b[eps=0.08]") && out.contains("prob_b[eps=0.02]"),
        "{out}"
    );
    assert!(out.contains("trend_holds="), "{out}");
    assert_eq!(
        run(&[
            "ladder",
            "--experiment",
            "cylinder-eventb",
            "--eps-ladder",
            "0.1,0.05"
        ])
        .0,
        1
    );
    assert_eq!(
        run(&[
            "ladder",
            "--experiment",
            "ladder",
            "--eps-ladder",
            "0.1,0.05,0.02"
        ])
        .0,
        1
    );
}

#[test]
fn side_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("field.csv");
    ok(&[
        "dpp",
        "solve",
        "--n",
        "1",
        "--p",
        "4",
        "--eps",
        "0.1",
        "--h",
        "0.025",
        "--domain",
        "interval(0;1)",
        "--payoff",
        "linear",
        "--x0",
        "0.5",
        "--field",
        field.to_str().unwrap(),
    ]);
    assert!(read(&field).starts_with("x0,kind,value\n"));
    let audit = dir.path().join("audit.csv");
    ok(&[
        "cylinder",
        "bottom",
        "--n",
        "2",
        "--p",
        "4",
        "--r",
        "1",
        "--eps",
        "0.1",
        "--t0",
        "0.5",
        "--episodes",
        "50",
        "--audit",
        audit.to_str().unwrap(),
    ]);
    assert!(read(&audit).lines().count() > 1);
    let trace = dir.path().join("trace.csv");
    ok(&[
        "play",
        "--n",
        "1",
        "--p",
        "4",
        "--eps",
        "0.1",
        "--domain",
        "interval(0;1)",
        "--x0",
        "0.5",
        "--strategy1",
        "idle",
        "--strategy2",
        "idle",
        "--payoff",
        "linear",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(read(&trace).lines().count() > 1);
}
