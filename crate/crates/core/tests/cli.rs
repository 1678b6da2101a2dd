use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sgehc");

fn sgehc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SGE_THREADS").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"{
  "problem": "zero:dim=2;lower=-1;upper=1",
  "splits": [1, 1],
  "nodes": 20,
  "tau": 0.01,
  "report_times": [0.05, 0.1]
}"#;

#[test]
fn enumerate_prints_counts() {
    for (dim, lambda, k, want) in [
        ("2", "0.15915494309189535", "3", "33"),
        ("1", "0.15915494309189535", "3", "7"),
        ("5", "0.3183098861837907", "1", "1"),
    ] {
        let o = sgehc(&["enumerate", "--dim", dim, "--lambda", lambda, "--order", k]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), want);
    }
    let o = sgehc(&[
        "enumerate",
        "--dim",
        "1",
        "--lambda",
        "0.15915494309189535",
        "--order",
        "3",
        "--list",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    assert_eq!(lines[0], "(-1) 1 1");
    assert_eq!(lines[1], "(0) 1 0");
    assert_eq!(lines[7], "7");
}

#[test]
fn exit_codes_follow_the_help_text() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out");
    let out = out.to_str().unwrap();

    let help = sgehc(&["--help"]);
    let help = String::from_utf8(help.stdout).unwrap();
    for code in 0..=6 {
        assert!(help.contains(&format!("  {code}  ")), "help lists exit code {code}");
    }

    let o = sgehc(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let unknown = write_config(
        d,
        "unknown.json",
        "{\"problem\": \"test2d\", \"splits\": [7, 7], \"nodes\": 3249,\n\"tau\": 0.01, \"colour\": 3}",
    );
    let o = sgehc(&["solve", "--config", unknown.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(
        stderr(&o).contains("colour") && stderr(&o).contains("line 2"),
        "{}",
        stderr(&o)
    );

    let negative = write_config(d, "negative.json", &SMALL.replace("0.01", "-0.01"));
    let o = sgehc(&["solve", "--config", negative.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("'tau'"), "{}", stderr(&o));

    let o = sgehc(&["enumerate", "--dim", "2", "--lambda", "0.2", "--order", "0.5"]);
    assert_eq!(o.status.code(), Some(4));
    let o = sgehc(&["enumerate", "--dim", "2", "--lambda=-1", "--order", "3"]);
    assert_eq!(o.status.code(), Some(4));

    let grid = write_config(
        d,
        "grid.json",
        &SMALL.replace("\"nodes\": 20", "\"nodes\": 36, \"node_strategy\": \"grid\""),
    );
    let o = sgehc(&["solve", "--config", grid.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).contains("singular"));

    let missing = d.join("missing.json");
    let o = sgehc(&["solve", "--config", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(6));

    let o = Command::new(BIN)
        .args(["enumerate", "--dim", "1", "--lambda", "0.2", "--order", "2"])
        .env("SGE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn solve_writes_report_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    let out = dir.path().join("run");
    let o = sgehc(&[
        "--threads",
        "2",
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "time,linf,rms,kappa,residual,wall_seconds");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("5.00000000e-2,0.00000000e0,0.00000000e0,"));

    // the sidecar alone reproduces the run byte for byte
    let sidecar = out.join("resolved_config.json");
    let text = std::fs::read_to_string(&sidecar).unwrap();
    for key in ["\"lambda\"", "\"seed\"", "\"node_strategy\"", "\"boundary_time_rule\""] {
        assert!(text.contains(key), "sidecar lacks {key}");
    }
    let again = dir.path().join("again");
    let o = sgehc(&[
        "solve",
        "--config",
        sidecar.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(again.join("report.csv")).unwrap(), csv.as_bytes());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", &SMALL.replace("zero:", "constant:c=0.5;"));
    let mut reports = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}"));
        let o = sgehc(&[
            "--threads",
            threads,
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        reports.push(std::fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn dump_nodes_lists_every_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    let o = sgehc(&[
        "dump-nodes",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("nodes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "id,kind,owner,x1,x2");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let field = rows.iter().filter(|r| r[1] != "fictitious").count();
    let fictitious = rows.iter().filter(|r| r[1] == "fictitious").count();
    assert_eq!(field, 20);
    assert_eq!(fictitious, rows.iter().filter(|r| r[1] == "boundary").count());
    for r in &rows {
        assert_eq!(r[2], "0");
    }
}

#[test]
fn approx_check_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "trig.json",
        r#"{"function": "trig", "lower": [-1, -1], "upper": [1, 1], "lambda": 0.23, "orders": [4, 8, 16], "report": "trig.csv"}"#,
    );
    let o = sgehc(&[
        "approx-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("trig.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "K,basis_size,interp_max,laplacian_max,kappa");
    let mut sizes = Vec::new();
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        // the trig test function lies in the span of every rung
        assert!(f[2] <= 1e-10 && f[3] <= 1e-6, "{l}");
        sizes.push(f[1]);
    }
    assert!(sizes.windows(2).all(|w| w[0] < w[1]));

    let preset = concat!(env!("CARGO_MANIFEST_DIR"), "/presets/approx_periodic.json");
    let o = sgehc(&[
        "approx-check",
        "--config",
        preset,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("approx_periodic.csv")).unwrap();
    let errs: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 4);
    for w in errs.windows(2) {
        assert!(w[1] <= 2.0 * w[0], "ladder {errs:?}");
    }
    assert!(errs[3] < 0.01 * errs[0], "ladder {errs:?}");

    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{"function": "trig", "lower": [-1, -1], "upper": [1, 1], "lambda": 0.25, "orders": [0.5]}"#,
    );
    let o = sgehc(&[
        "approx-check",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
