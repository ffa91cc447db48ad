use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ptm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn behrend_gen_oracle_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.dmat");
    let o = ptm(&[
        "gen",
        "--kind",
        "behrend",
        "--n",
        "5",
        "--seed",
        "1",
        "--out",
        p(&b),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("b.dmat.prov.json").exists());

    let o = ptm(&["oracle", "--kind", "triangles", "--input", p(&b)]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 5);
    for v in &lines {
        assert_eq!(v["kind"], "Triangle");
        assert_eq!(v["indices"].as_array().unwrap().len(), 3);
    }

    let o = ptm(&["repair", "--kind", "bounds", "--input", p(&b)]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (lo, hi) = (
        v["lower_entries"].as_u64().unwrap(),
        v["upper_entries"].as_u64().unwrap(),
    );
    assert!(lo <= hi);
    assert_eq!(v["n"], 15);

    let fixed = dir.path().join("fixed.dmat");
    let o = ptm(&[
        "repair",
        "--kind",
        "behrend",
        "--input",
        p(&b),
        "--out",
        p(&fixed),
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["changed_entries"], 10);
    let o = ptm(&[
        "oracle",
        "--kind",
        "triangles",
        "--input",
        p(&fixed),
        "--count",
    ]);
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn test_exit_codes_follow_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("ultra.dmat");
    assert!(ptm(&[
        "gen",
        "--kind",
        "random-ultra",
        "--n",
        "40",
        "--seed",
        "3",
        "--out",
        p(&u)
    ])
    .status
    .success());
    let o = ptm(&[
        "test",
        "--kind",
        "ultra",
        "--input",
        p(&u),
        "--eps",
        "0.1",
        "--seed",
        "7",
        "--profile",
        "desk",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["verdict"], "accept");
    assert_eq!(v["config"]["options"]["profile"]["name"], "desk");
    assert!(v["config"]["options"]["profile"]["ultra_s_coeff"].is_number());

    let q = dir.path().join("dq.dmatb");
    assert!(ptm(&[
        "gen",
        "--kind",
        "query-lb",
        "--n",
        "60",
        "--eps",
        "0.1",
        "--out",
        p(&q)
    ])
    .status
    .success());
    let o = ptm(&[
        "test",
        "--kind",
        "ultra",
        "--input",
        p(&q),
        "--eps",
        "0.1",
        "--profile",
        "paper",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["verdict"], "reject");
    assert_eq!(v["report"]["certificate"]["kind"], "UltraTriple");

    let o = ptm(&[
        "test",
        "--kind",
        "ultra",
        "--input",
        p(&q),
        "--eps",
        "0.1",
        "--budget",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = ptm(&[
        "test",
        "--kind",
        "metric",
        "--input",
        p(&dir.path().join("missing.dmat")),
        "--eps",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = ptm(&["test", "--kind", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn asymmetric_input_is_refused_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("asym.dmat");
    std::fs::write(&f, "3\n0 1 2\n1 0 1\n3 1 0\n").unwrap();
    let o = ptm(&["test", "--kind", "metric", "--input", p(&f), "--eps", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not clean"));
    let o = ptm(&[
        "test",
        "--kind",
        "metric",
        "--input",
        p(&f),
        "--eps",
        "0.5",
        "--skip-clean",
    ]);
    assert_ne!(o.status.code(), Some(2));
}

#[test]
fn twin_and_corrupt_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.dmat");
    assert!(ptm(&["gen", "--kind", "twin", "--n", "6", "--out", p(&t)])
        .status
        .success());
    let good = dir.path().join("t_good.dmat");
    let bad = dir.path().join("t_bad.dmat");
    assert!(good.exists() && bad.exists());
    let o = ptm(&[
        "oracle",
        "--kind",
        "triangles",
        "--input",
        p(&good),
        "--count",
    ]);
    assert_eq!(stdout(&o).trim(), "0");

    let base = dir.path().join("m.dmat");
    let c = dir.path().join("c.dmat");
    assert!(ptm(&[
        "gen",
        "--kind",
        "random-metric",
        "--n",
        "30",
        "--out",
        p(&base),
        "--params",
        "max_weight=9"
    ])
    .status
    .success());
    let o = ptm(&[
        "gen",
        "--kind",
        "corrupt",
        "--input",
        p(&base),
        "--eps",
        "0.2",
        "--out",
        p(&c),
        "--json",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["meta"]["provenance"], "corrupted");
    assert!(
        v[0]["meta"]["params"]["certified_lower_entries"]
            .as_u64()
            .unwrap()
            > 0
    );
    let o = ptm(&[
        "gen",
        "--kind",
        "random-metric",
        "--n",
        "5",
        "--out",
        p(&base),
        "--params",
        "colour=red",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_argv_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.dmat"), dir.path().join("b.dmat"));
    for f in [&a, &b] {
        assert!(ptm(&[
            "gen",
            "--kind",
            "sample-lb",
            "--n",
            "50",
            "--eps",
            "0.1",
            "--seed",
            "9",
            "--out",
            p(f)
        ])
        .status
        .success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let spec = dir.path().join("sweep.json");
    std::fs::write(
        &spec,
        r#"{"instance": {"kind": "query_lb", "n": 60, "eps": 0.1}, "strategy": "clique", "budgets": [10, 45], "trials": 30, "seed": 2}"#,
    )
    .unwrap();
    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    assert!(
        ptm(&["experiment", "sweep", "--spec", p(&spec), "--out", p(&x)])
            .status
            .success()
    );
    assert!(ptm(&[
        "--threads",
        "1",
        "experiment",
        "sweep",
        "--spec",
        p(&spec),
        "--out",
        p(&y)
    ])
    .status
    .success());
    let csv = std::fs::read_to_string(&x).unwrap();
    assert_eq!(csv, std::fs::read_to_string(&y).unwrap());
    assert!(csv.starts_with("budget,trials,detections,rate,ci_low,ci_high,seed,instance,strategy"));
    assert!(dir.path().join("x.csv.config.json").exists());
}

#[test]
fn campaigns_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("c.json");
    std::fs::write(
        &spec,
        r#"{"tester": "tree", "instance": {"kind": "random_tree", "n": [10, 20]}, "eps": 0.3, "profile": "desk", "trials": 20, "seed": 1}"#,
    )
    .unwrap();
    let out = dir.path().join("c.csv");
    assert!(ptm(&[
        "experiment",
        "completeness",
        "--spec",
        p(&spec),
        "--out",
        p(&out),
        "--quiet"
    ])
    .status
    .success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",true,"));

    let q = dir.path().join("q.dmat");
    assert!(ptm(&[
        "gen",
        "--kind",
        "query-lb",
        "--n",
        "60",
        "--eps",
        "0.1",
        "--out",
        p(&q)
    ])
    .status
    .success());
    let o = ptm(&[
        "diagnose",
        "skeleton",
        "--input",
        p(&q),
        "--kind",
        "ultra",
        "--samples",
        "3",
        "--seed",
        "4",
        "--json",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["state"]["parts"].is_array());
    let d = dir.path().join("d.csv");
    let o = ptm(&[
        "diagnose",
        "decay",
        "--input",
        p(&q),
        "--eps",
        "0.1",
        "--steps",
        "4",
        "--trials",
        "5",
        "--csv",
        p(&d),
    ]);
    assert!(o.status.success());
    assert!(!String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(std::fs::read_to_string(&d).unwrap().lines().count(), 6);
}

/// Every flag declared on a subcommand appears in its `--help` output.
#[test]
fn help_lists_every_flag() {
    let cases: &[(&[&str], &[&str])] = &[
        (
            &["gen"],
            &[
                "--kind",
                "--n",
                "--eps",
                "--out",
                "--input",
                "--params",
                "--seed",
                "--json",
                "--quiet",
                "--threads",
            ],
        ),
        (
            &["test"],
            &[
                "--kind",
                "--input",
                "--eps",
                "--profile",
                "--budget",
                "--skip-clean",
                "--two-phase",
                "--timing",
                "--out",
                "--seed",
            ],
        ),
        (
            &["oracle"],
            &["--kind", "--input", "--cap", "--count", "--out"],
        ),
        (
            &["repair"],
            &["--kind", "--input", "--out", "--lower-out", "--i", "--j"],
        ),
        (
            &["diagnose", "skeleton"],
            &[
                "--input",
                "--kind",
                "--samples",
                "--eps",
                "--out",
                "--seed",
                "--json",
            ],
        ),
        (
            &["diagnose", "decay"],
            &["--input", "--kind", "--eps", "--steps", "--trials", "--csv"],
        ),
        (&["experiment"], &["--spec", "--out"]),
    ];
    for (cmd, flags) in cases {
        let mut args = cmd.to_vec();
        args.push("--help");
        let o = ptm(&args);
        assert!(o.status.success());
        let text = stdout(&o);
        for flag in *flags {
            assert!(text.contains(flag), "{cmd:?} help lacks {flag}");
        }
    }
    let top = stdout(&ptm(&["--help"]));
    for sub in ["gen", "test", "oracle", "repair", "diagnose", "experiment"] {
        assert!(top.contains(sub));
    }
}
