use std::process::Command;

use serde_json::Value;

fn stw(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stw")).args(args).output().expect("run stw");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let mut a = vec!["--json"];
    a.extend_from_slice(args);
    let (code, out, err) = stw(&a);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn item<'a>(v: &'a Value, name: &str) -> &'a Value {
    v["results"].as_array().unwrap().iter().find(|i| i["name"] == name).unwrap()
}

#[test]
fn dixcor_report_passes_and_is_byte_stable() {
    let (c1, a, _) = stw(&["--json", "reproduce", "dixcor"]);
    let (c2, b, _) = stw(&["--json", "reproduce", "dixcor"]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    let cy = item(&v, "Cy@2^21-1")["scalar"].as_f64().unwrap();
    assert!((cy - 2.0 / 3.0).abs() < 0.02);
    let d = &item(&v, "dixmier")["envelope"];
    assert!((d["lo"].as_f64().unwrap() - 1.0 / 3.0).abs() < 0.02);
    assert!((d["hi"].as_f64().unwrap() - 2.0 / 3.0).abs() < 0.02);
    assert_eq!(item(&v, "strict_subset")["check"]["passed"], true);
}

#[test]
fn tight_tolerance_fails_the_assertions() {
    let (code, _, err) = stw(&["--tol", "1e-9", "reproduce", "dixcor"]);
    assert_eq!(code, 4);
    assert!(err.contains("assertion failed: dixmier"));
}

#[test]
fn config_file_feeds_the_tolerance_and_flags_win() {
    let dir = std::env::temp_dir().join(format!("stw-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, "tol = 1e-9\n").unwrap();
    let p = cfg.to_str().unwrap();
    assert_eq!(stw(&["--config", p, "reproduce", "dixcor"]).0, 4);
    assert_eq!(stw(&["--config", p, "--tol", "0.02", "reproduce", "dixcor"]).0, 0);
    std::fs::write(&cfg, "tolerance = 1\n").unwrap();
    assert_eq!(stw(&["--config", p, "reproduce", "dixcor"]).0, 2);
}

#[test]
fn schrodinger_scales_with_c3() {
    for c3 in ["1", "2"] {
        let v = json(&["reproduce", "schrodinger", "--c3", c3]);
        let m = item(&v, "measurability");
        assert_eq!(m["verdict"]["answer"], "yes");
        let want: f64 = c3.parse().unwrap();
        assert!((m["verdict"]["value"].as_f64().unwrap() - want).abs() < 0.03);
    }
    assert_eq!(stw(&["reproduce", "schrodinger", "--c3", "0"]).0, 2);
}

#[test]
fn weights_check_reports_summability() {
    let v = json(&["weights", "check", "--name", "g_nonreg"]);
    assert_eq!(item(&v, "l1")["verdict"]["answer"], "yes");
    let v = json(&["weights", "check", "--name", "g_pow(1)"]);
    assert_eq!(item(&v, "l1")["verdict"]["answer"], "no");
    let r = item(&v, "dyadic_sum_ratio_512")["scalar"].as_f64().unwrap();
    assert!((r - std::f64::consts::LOG2_E).abs() < 2e-3);
    assert_eq!(stw(&["weights", "check", "--name", "nope"]).0, 2);
}

#[test]
fn alternating_sequence_has_banach_value_zero() {
    let v = json(&["seq", "analyze", "--spec", "alt", "--op", "banach"]);
    let e = &item(&v, "banach")["envelope"];
    assert_eq!(e["lo"].as_f64().unwrap(), 0.0);
    assert_eq!(e["hi"].as_f64().unwrap(), 0.0);
}

#[test]
fn dixmier_and_transport_commands() {
    let v = json(&["dixmier", "--mu", "dfy", "--weight", "f_cor"]);
    let e = &item(&v, "dixmier")["envelope"];
    assert!((e["hi"].as_f64().unwrap() - 2.0 / 3.0).abs() < 0.02);
    let v = json(&["transport", "--from", "g_cor", "--to", "f_cor", "--mu", "dfy"]);
    assert_eq!(item(&v, "strict_subset")["text"], "yes");
    let (code, _, err) = stw(&["dixmier", "--mu", "dfy", "--weight", "g_pow(2)"]);
    assert_eq!(code, 2);
    assert!(err.contains("integrable"));
}

#[test]
fn sequence_dumps_are_csv() {
    let (code, out, _) = stw(&["seq", "transform", "--op", "cesaro", "--spec", "chi", "--window", "0:3"]);
    assert_eq!(code, 0);
    assert_eq!(out, "n,value\n0,1\n1,1\n2,1\n3,1\n");
    let spec = r#"{"kind":"values","data":[1,2,3]}"#;
    let (_, out, _) = stw(&["seq", "transform", "--op", "Cinv", "--spec", spec]);
    assert_eq!(out, "n,value\n0,1\n1,3\n2,5\n");
}

#[test]
fn numeric_failures_exit_with_3() {
    let spec = r#"{"kind":"runlength","blocks":[[2000,1,1e-300]]}"#;
    let (code, _, _) = stw(&["seq", "transform", "--op", "N", "--weight", "g_pow(2)", "--spec", spec]);
    assert_eq!(code, 3);
}

#[test]
fn connes_check_verdicts() {
    let v = json(&["connes", "check"]);
    assert_eq!(item(&v, "trace_formula")["verdict"]["answer"], "yes");
    assert_eq!(item(&v, "measurability")["verdict"]["answer"], "yes");
    let sym = r#"{"kind":"separable","x":"indicator01","xi":"bracket-inverse"}"#;
    let w = json(&["connes", "check", "--symbol", sym]);
    assert_eq!(item(&v, "hi_change"), item(&w, "hi_change"));
}
