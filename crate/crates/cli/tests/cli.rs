use std::path::PathBuf;
use std::process::{Command, Output};

const COMMANDS: [&str; 10] =
    ["sigma", "defect", "certify", "microstate", "hn", "sigma-n", "energy", "optimum", "ugw-sigma", "validate"];

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tree-entropy"))
        .args(args)
        .env_remove("TREE_ENTROPY_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn value(csv: &str, key: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no row {key} in\n{csv}"))
        .to_string()
}

#[test]
fn help_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden"].iter().collect();
    for cmd in std::iter::once("main").chain(COMMANDS) {
        let args: Vec<&str> = if cmd == "main" { vec!["--help"] } else { vec![cmd, "--help"] };
        let text = stdout(&args);
        let path = dir.join(format!("{cmd}.txt"));
        if update {
            std::fs::write(&path, &text).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert_eq!(text, golden, "help of {cmd} changed; rerun with UPDATE_GOLDEN=1 if intended");
    }
}

#[test]
fn help_lists_every_subcommand() {
    let text = stdout(&["--help"]);
    for cmd in COMMANDS {
        assert!(text.contains(&format!("  {cmd} ")), "{cmd} missing from --help");
    }
}

#[test]
fn sigma_of_alternating_law() {
    let out = stdout(&["sigma", "--law", &data("alternating.law"), "--d", "3"]);
    assert!(out.starts_with("# schema=1\nquantity,value\n"));
    let expect = -0.5 * std::f64::consts::LN_2;
    for key in ["sigma_e", "sigma_1"] {
        let v: f64 = value(&out, key).parse().unwrap();
        assert!((v - expect).abs() < 1e-12, "{key} = {v}");
    }
}

#[test]
fn numbers_carry_seventeen_digits() {
    let out = stdout(&["sigma", "--law", &data("iid2.law")]);
    let v = value(&out, "sigma_e");
    let mantissa = v.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{v}");
}

#[test]
fn certify_iid_law() {
    let out = stdout(&["certify", "--law", &data("iid2.law"), "--kind", "vertex", "--mode", "net", "--resolution", "32"]);
    assert_eq!(value(&out, "verdict"), "certified-typical");
    let h: f64 = value(&out, "entropy").parse().unwrap();
    assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn heuristic_mode_needs_a_seed() {
    let out = run(&["certify", "--law", &data("iid2.law"), "--kind", "vertex", "--mode", "heuristic"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sampling_needs_a_seed() {
    let out = run(&["hn", "--law", &data("iid2.law"), "--n", "8", "--d", "3", "--graphs", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["sigma"]).status.code(), Some(2));
    assert_eq!(run(&["hn", "--law", "x", "--eps", "abc"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.law");
    std::fs::write(&bad, "d=3\nr=1\nalphabet=0,1\n0,0,0,0 0.5\n0,0,0,x 0.5\n").unwrap();
    let out = run(&["sigma", "--law", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["error"], "parse");
    assert!(rec["message"].as_str().unwrap().contains("line 5"), "{rec}");
}

#[test]
fn cap_errors_point_to_estimation() {
    let out = run(&["microstate", "--law", &data("iid2.law"), "--n", "30", "--d", "3", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["error"], "cap");
    assert!(rec["message"].as_str().unwrap().contains("Monte Carlo"));
}

#[test]
fn validate_rejects_non_invariant_law() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.law");
    std::fs::write(&bad, "d=3\nr=1\nalphabet=0,1\n0,1,0,0 1\n").unwrap();
    let out = run(&["validate", "--law", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("automorphism"));
    assert!(run(&["validate", "--law", &data("alternating.law")]).status.success());
    assert!(run(&["validate", "--law", &data("star.ugw")]).status.success());
}

#[test]
fn reruns_are_byte_identical_and_metadata_is_separate() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "hn".to_string(),
            "--law".into(),
            data("iid2.law"),
            "--n".into(),
            "10".into(),
            "--d".into(),
            "3".into(),
            "--graphs".into(),
            "6".into(),
            "--eps".into(),
            "0.3".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            out.into(),
        ]
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run_with = |path: &std::path::Path, threads: &str| {
        let st = Command::new(env!("CARGO_BIN_EXE_tree-entropy"))
            .args(args(path.to_str().unwrap()))
            .env("TREE_ENTROPY_THREADS", threads)
            .status()
            .unwrap();
        assert!(st.success());
    };
    run_with(&a, "1");
    run_with(&b, "3");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let meta = std::fs::read_to_string(dir.path().join("a.csv.meta")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(meta["threads"], 1);
    assert!(meta["unix_time"].is_u64());
}

#[test]
fn jsonl_records_carry_schema() {
    let out = stdout(&["--format", "jsonl", "sigma", "--law", &data("iid2.law")]);
    for line in out.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["schema"], 1);
    }
}

#[test]
fn energy_on_k4_max_cut() {
    let out = stdout(&["optimum", "--potential", &data("maxcut.pot"), "--d", "3", "--graph", &data("k4.edges"), "--skip-bounds"]);
    let line = out.lines().find(|l| l.starts_with("L/n[")).unwrap();
    assert!(line.contains(",2.0000000000000000e0,"), "{line}");
}

#[test]
fn constant_potential_bounds_are_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let pot = dir.path().join("c.pot");
    std::fs::write(&pot, "r=1\nalphabet=0,1,2\npsi0 0 0.5\npsi0 1 0.5\npsi0 2 0.5\n").unwrap();
    let out = stdout(&["energy", "--potential", pot.to_str().unwrap(), "--d", "3"]);
    let expect = 3f64.ln() + 0.5;
    for key in ["lower", "upper"] {
        let v: f64 = value(&out, key).trim_end_matches(',').parse().unwrap();
        assert_eq!(v, expect);
    }
}

#[test]
fn ugw_sigma_matches_between_routes() {
    let out = stdout(&["ugw-sigma", "--law", &data("star.ugw")]);
    let a: f64 = value(&out, "sigma_r").parse().unwrap();
    let b: f64 = value(&out, "sigma_e").parse().unwrap();
    assert!((a - b).abs() < 1e-12);
}
