use std::fs;
use std::process::Command;

use lvalue_lab::cli::{format_real, run, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
use proptest::prelude::*;
use serde_json::Value;

fn invoke(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("lvalue-lab").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn invoke_json(args: &[&str]) -> (i32, Value) {
    let (code, text) = invoke(args);
    (code, serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}")))
}

#[test]
fn qexp_csv() {
    let (code, text) = invoke(&["qexp", "--form", "delta", "--n", "10"]);
    assert_eq!(code, EXIT_OK);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,c,a"));
    let row: Vec<&str> = lines.next().into_iter().chain(lines.next()).last().unwrap().split(',').collect();
    assert_eq!(&row[..2], ["2", "-24"]);
    assert!((row[2].parse::<f64>().unwrap() + 0.530330).abs() < 1e-6);
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn json_echoes_resolved_config() {
    let (code, doc) = invoke_json(&["delta", "--m", "1", "--n", "2", "--q", "1", "--k", "12", "--c-max", "2000"]);
    assert_eq!(code, EXIT_OK);
    let config = &doc["config"];
    assert_eq!(config["command"], "delta");
    assert_eq!(config["params"]["c-max"], 2000);
    assert_eq!(config["params"]["space"], "full");
    assert_eq!(config["format"], "json");
    assert!(config["threads"].as_u64().unwrap() >= 1);
    assert_eq!(config["tail"], 1e-6);
    let result = &doc["result"];
    assert_eq!(result["c_max"], 2000);
    // Δ_1(1, 2) at weight 12 is the harmonic weight of Δ times τ(2) = −24, over 2^{11/2}.
    let v = result["value"].as_f64().unwrap();
    assert!((v - 2.840_287 * -24.0 / 2f64.powf(5.5)).abs() < 1e-5, "{v}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, "# Δ_1 at weight 12\nm = 1\nn = 2\nq=1\nk=12\nc-max=1500\nformat=json\n").unwrap();
    let path = path.to_str().unwrap();
    let (code, doc) = invoke_json(&["delta", "--config", path, "--n", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["config"]["params"]["n"], 1);
    assert_eq!(doc["config"]["params"]["m"], 1);
    assert_eq!(doc["config"]["params"]["c-max"], 1500);

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "m=1\nn=1\nq=1\nk=12\nzeta=3\n").unwrap();
    let (code, doc) = invoke_json(&["delta", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert_eq!(doc["error"]["code"], "unknown_key");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["delta", "--m", "1"][..],
        &["delta", "--m", "x", "--n", "1", "--q", "1", "--k", "12"],
        &["nonsense"],
        &["qexp", "--form", "delta", "--n", "5", "--bogus", "1"],
        &["qexp", "--form", "g7", "--n", "5"],
        &["delta", "--m", "1", "--n", "1", "--q", "1", "--k", "3"],
    ] {
        let (code, doc) = invoke_json(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(doc["error"]["code"].is_string(), "{args:?}");
    }
}

#[test]
fn unreachable_tail_exits_three_with_bounds() {
    let (code, doc) = invoke_json(&["delta", "--m", "1", "--n", "1", "--q", "10007", "--k", "2", "--tail", "1e-6"]);
    assert_eq!(code, EXIT_NUMERIC);
    assert_eq!(doc["error"]["code"], "unreachable_tail");
    assert!(doc["error"]["details"]["achieved"].as_f64().unwrap() > 1e-6);
    assert_eq!(doc["config"]["tail"], 1e-6);

    let (code, doc) = invoke_json(&["delta", "--m", "1", "--n", "1", "--q", "10007", "--k", "2", "--c-max", "1000000"]);
    assert_eq!(code, EXIT_OK);
    assert!((doc["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn outputs_are_bit_identical_across_runs_and_threads() {
    let args = ["moments", "--Q", "30", "--k", "2", "--l", "2", "--x", "20", "--levels", "prime", "--c-max", "3000"];
    let (_, a) = invoke(&[&args[..], &["--threads", "1"]].concat());
    let (_, b) = invoke(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(a, b);
    let (_, c) = invoke_json(&[&args[..], &["--threads", "3"]].concat());
    let a: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(a["result"], c["result"]);
}

#[test]
fn distribution_reads_values_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("values.csv");
    fs::write(&path, "value,weight,vanishing\n0.0,1,0\n0.5,2,0\n,1,1\n").unwrap();
    let (code, doc) = invoke_json(&["distribution", "--input", path.to_str().unwrap(), "--alpha", "-1", "--beta", "1"]);
    assert_eq!(code, EXIT_OK, "{doc}");
    let r = &doc["result"];
    assert_eq!(r["mass"], 0.75);
    assert_eq!(r["vanishing_samples"], 1);
    assert_eq!(doc["config"]["params"]["alpha"], -1.0);

    fs::write(&path, "v,w\n1,1\n").unwrap();
    let (code, doc) = invoke_json(&["distribution", "--input", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert_eq!(doc["error"]["code"], "input");
}

#[test]
fn kloosterman_prints_one_value_per_line() {
    let (code, text) = invoke(&["kloosterman", "--m", "1", "--n", "1", "--c", "1..4"]);
    assert_eq!(code, EXIT_OK);
    let values: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 4);
    assert_eq!(values[0], 1.0);
    assert!((values[2] + 1.0).abs() < 1e-12 && (values[3] + 2.0).abs() < 1e-12);
}

#[test]
fn zeros_and_lvalue() {
    let (code, text) = invoke(&["zeros", "--form", "delta", "--T", "12"]);
    assert_eq!(code, EXIT_OK);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,gamma,gamma_tilde"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((first[1] - 9.222_379_4).abs() < 1e-6);

    let (code, doc) = invoke_json(&["lvalue", "--form", "f11"]);
    assert_eq!(code, EXIT_OK);
    let cv = doc["result"]["central_value"]["value"].as_f64().unwrap();
    assert!((cv - 0.253_841_860_855_910_7).abs() < 1e-10);
}

#[test]
fn verify_quick_passes() {
    let (code, text) = invoke(&["verify", "--quick"]);
    assert_eq!(code, EXIT_OK, "{text}");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), lvalue_lab::verify::QUICK.len());
    for line in lines {
        assert!(line.starts_with("[PASS] ") && line.contains(" measured=") && line.contains(" bound="), "{line}");
    }
}

#[test]
fn binary_uses_cache_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lvalue-lab"))
        .args(["qexp", "--form", "f11", "--n", "20", "--format", "json"])
        .env("LVALUE_LAB_CACHE", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["cache_dir"], dir.path().to_str().unwrap());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);

    let out = Command::new(env!("CARGO_BIN_EXE_lvalue-lab")).args(["delta"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn real_formatting() {
    assert_eq!(format_real(-0.5303300858899106), "-0.5303300858899106");
    assert_eq!(format_real(0.1), "0.10000000000000001");
    assert_eq!(format_real(1e-300), "1e-300");
    assert_eq!(format_real(-1.2345678901234567e20), "-1.2345678901234567e+20");
    assert_eq!(format_real(2.0), "2");
    assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
}

proptest! {
    #[test]
    fn real_formatting_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = format_real(x);
        prop_assert!(!s.contains(','));
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
