use std::process::{Command, Output};

use serde_json::Value;

fn oddcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oddcf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn json(args: &[&str]) -> Value {
    let o = oddcf(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn digits(doc: &Value) -> Vec<(i64, u64)> {
    doc["expansion"]["digits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| (d[0].as_i64().unwrap(), d[1].as_u64().unwrap()))
        .collect()
}

#[test]
fn expand_one_third_terminates_after_one_digit() {
    let doc = json(&["expand", "--alpha", "1", "--x", "1/3", "--n", "10"]);
    assert_eq!(digits(&doc), vec![(1, 3)]);
    assert_eq!(doc["expansion"]["terminated"], true);
    assert_eq!(doc["errors"][0]["error"], "0");
    assert_eq!(doc["provenance"]["precision_bits"], 256);
}

#[test]
fn expand_quarter_at_g_is_clean() {
    let doc = json(&["expand", "--alpha", "g", "--x", "0.25", "--n", "30"]);
    // 1/0.25 = 4 gives (+1, 5) and φ = −1, then (−1, 1) and φ = 0
    assert_eq!(digits(&doc), vec![(1, 5), (-1, 1)]);
    assert_eq!(doc["expansion"]["terminated"], true);
    assert_eq!(doc["expansion"]["alpha"], "g");
    assert!(doc["constraints"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn expand_left_endpoint_has_digit_minus_one() {
    let doc = json(&["expand", "--alpha", "1.2", "--x", "alpha-2", "--n", "1"]);
    assert_eq!(digits(&doc), vec![(-1, 1)]);
}

#[test]
fn expand_golden_fixed_point_gives_fibonacci() {
    let doc = json(&["expand", "--alpha", "1", "--x", "g", "--n", "4"]);
    assert_eq!(digits(&doc), vec![(1, 1); 4]);
    let q: Vec<&str> = doc["convergents"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["q"].as_str().unwrap())
        .collect();
    assert_eq!(q, ["0", "1", "1", "2", "3", "5"]);
}

#[test]
fn eval_with_and_without_tail() {
    let doc = json(&["eval", "--digits", "3"]);
    assert_eq!(doc["exact"], "1/3");
    let doc = json(&["eval", "--digits", "3,-1,5", "--tail", "1/2"]);
    assert_eq!(doc["exact"], "13/28");
}

#[test]
fn orbit_with_zero_steps_is_the_segment() {
    let o = oddcf(&["orbit", "--n", "0", "--grid", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,x,y"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!((f[0], f[2]), ("0", "0"));
        let x: f64 = f[1].parse().unwrap();
        assert!((-1.0..1.0).contains(&x));
    }
}

#[test]
fn orbit_domain_check_passes_inside_the_parameter_range() {
    let o = oddcf(&["orbit", "--alpha", "1", "--grid", "100", "--n", "10", "--check-domain"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // 100 orbits of at most 11 points
    let rows = stdout(&o).lines().count() - 1;
    assert!(rows > 100 && rows <= 1100);
}

#[test]
fn orbit_below_g_is_allowed_and_emitted() {
    let o = oddcf(&["orbit", "--alpha", "0.9g", "--grid", "200", "--n", "50"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().count() > 200 * 10);
}

#[test]
fn density_matches_the_closed_form() {
    let doc = json(&["density", "--alpha", "1", "--at", "0.5"]);
    let h: f64 = doc["values"][0]["h"].as_str().unwrap().parse().unwrap();
    // 1/(3 log G · (0.5 + G − 1))
    let big_g = (1.0 + 5f64.sqrt()) / 2.0;
    let want = 1.0 / (3.0 * big_g.ln() * (0.5 + big_g - 1.0));
    assert!((h - want).abs() < 1e-14, "{h} vs {want}");
}

#[test]
fn rank_one_dump_contains_the_three_cylinder() {
    let o = oddcf(&["cylinders", "--alpha", "1", "--rank", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let three: Value = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|v| v["word"] == serde_json::json!([3]))
        .expect("word 3 present");
    let lo: f64 = three["delta"][0].as_str().unwrap().parse().unwrap();
    let hi: f64 = three["delta"][1].as_str().unwrap().parse().unwrap();
    assert_eq!((lo, hi), (0.25, 0.5));
    assert_eq!(three["q"], "3");
    assert_eq!(three["full"], true);
}

#[test]
fn entropy_is_reproducible_for_a_fixed_seed() {
    let args = ["entropy", "--alpha", "G", "--n", "300", "--trials", "4", "--seed", "7"];
    let a = oddcf(&args);
    let b = oddcf(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let doc: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["report"]["entropy"]["seed"], 7);
    assert_eq!(doc["provenance"]["seed"], 7);
}

#[test]
fn verify_exit_codes_follow_the_checks() {
    let ok = oddcf(&["verify", "--only", "mu-omega,c-alpha", "--grid", "5"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let doc: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(doc["pass"], true);
    assert!(doc["checks"][0].get("runtime").is_none());

    // the stated lower bound 1/(q_n q_{n+1}) ≤ |x − p_n/q_n| does not hold
    let bad = oddcf(&["verify", "--only", "approximation", "--expansions", "50"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("approximation"));
    let doc: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(doc["failing"], serde_json::json!(["approximation"]));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["frobnicate"][..],
        &["expand", "--alpha", "1.7", "--x", "0.1"],
        &["expand", "--alpha", "1", "--x", "1"],
        &["expand", "--alpha", "1", "--x", "0.3", "--precision", "32"],
        &["eval", "--digits", "2"],
        &["verify", "--only", "nonsense"],
        &["density", "--alpha", "1", "--at", "1.5"],
    ] {
        let o = oddcf(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn output_is_deterministic_and_can_go_to_a_file() {
    let dir = std::env::temp_dir().join(format!("oddcf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sweep.json");
    let p = path.to_str().unwrap();
    let a = oddcf(&["sweep", "--grid", "3", "--out", p]);
    assert_eq!(a.status.code(), Some(0));
    let first = std::fs::read(&path).unwrap();
    let b = oddcf(&["sweep", "--grid", "3"]);
    assert_eq!(first, b.stdout);
    let doc: Value = serde_json::from_slice(&first).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    // g, 1, G with the grid {g, g + 1/2, G} plus 1
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!((r["mu_omega"].as_f64().unwrap() - 1.4436354751788103).abs() < 1e-9);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn timings_flag_adds_runtimes() {
    let doc = json(&["--timings", "verify", "--only", "mu-omega", "--grid", "2"]);
    assert!(doc["provenance"]["seconds"].is_number());
    assert!(doc["checks"][0]["runtime"].is_number());
}
