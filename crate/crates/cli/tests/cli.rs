use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(name)
}

fn rde_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rde-lab"))
        .args(args)
        .env("RDE_LAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn topent_prints_exact_rate() {
    let gm2 = instance("gm2.json");
    let o = rde_lab(&["topent", path_str(&gm2), "--cover", "zero_cyl", "--nmax", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("exact rate:")).unwrap();
    assert!(line.contains("0.549306"), "{line}");
}

#[test]
fn validate_names_the_dead_row() {
    let o = rde_lab(&["validate", path_str(&instance("broken.json"))]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("row b") && out.contains("w1"), "{out}");
}

#[test]
fn validate_accepts_fixtures() {
    for name in ["gm2.json", "full2.json", "id2.json"] {
        let o = rde_lab(&["validate", path_str(&instance(name))]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
    }
}

#[test]
fn verify_seed_seven_passes() {
    let o = rde_lab(&["verify", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).trim_end().ends_with("PASS"));
}

#[test]
fn planted_fault_fails_verify() {
    let o = rde_lab(&["verify", "--instances", "4", "--inject-fault", "--only", "measure-invariance"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn distinct_exit_codes() {
    let gm2 = instance("gm2.json");
    let g = path_str(&gm2);
    let bad = std::env::temp_dir().join("rde-lab-malformed.json");
    std::fs::write(&bad, r#"{"alphabet": 1}"#).unwrap();
    let cases: [(&[&str], i32); 6] = [
        (&["topent", g], 2),
        (&["topent", "/nonexistent/x.json", "--cover", "zero_cyl"], 3),
        (&["validate", path_str(&bad)], 4),
        (&["topent", g, "--cover", "nope"], 5),
        (&["measent", g, "--measure", "nope", "--partition", "zero_cyl"], 5),
        (&["--cover-elems-max", "1", "topent", g, "--cover", "overlap", "--nmax", "4"], 6),
    ];
    for (args, code) in cases {
        let o = rde_lab(args);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn json_reports_are_byte_stable() {
    let gm2 = instance("gm2.json");
    let dir = std::env::temp_dir();
    let a = dir.join("rde-lab-stable-a.json");
    let b = dir.join("rde-lab-stable-b.json");
    for out in [&a, &b] {
        let o = rde_lab(&[
            "maximize",
            path_str(&gm2),
            "--partition",
            "zero_cyl",
            "--budget",
            "60",
            "--seed",
            "3",
            "--json",
            path_str(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.5);
}

#[test]
fn witness_chains_hold_on_gm2() {
    let o = rde_lab(&["witness", path_str(&instance("gm2.json")), "--cover", "zero_cyl", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("VIOLATED"));
}
