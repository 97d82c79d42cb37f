//! End-to-end runs of the `mdiqds` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mdiqds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdiqds"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .env_remove("RUST_LIB_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mdiqds(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// The desk network, shortened so a run takes a fraction of a second.
fn small_config(dir: &Path, slots: u64) -> String {
    let text = include_str!("../presets/desk.toml")
        .replace("slots = 10000000", &format!("slots = {slots}"));
    let path = dir.join(format!("small-{slots}.toml"));
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_slots_give_empty_tables_and_a_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path(), 0);
    let out = tmp.path().join("out");
    ok(&["simulate", "--config", &config, "--out", s(&out)]);
    let report = read_json(&out.join("report.json"));
    for table in report["tables"].as_object().unwrap().values() {
        for e in table["entries"].as_array().unwrap() {
            assert_eq!(e["sent"], 0);
            assert_eq!(e["detected"], 0);
        }
    }
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["tool"], "mdiqds");
    assert_eq!(manifest["config"]["slots"], 0);
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path(), 300_000);
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "simulate",
            "--config",
            &config,
            "--seed",
            seed,
            "--out",
            s(&out),
        ]);
        std::fs::read(out.join("report.json")).unwrap()
    };
    let a = run("a", "4");
    assert_eq!(a, run("b", "4"));
    assert_ne!(a, run("c", "5"));
}

#[test]
fn written_config_replays_the_run() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path(), 300_000);
    let first = tmp.path().join("first");
    ok(&[
        "simulate",
        "--config",
        &config,
        "--seed",
        "9",
        "--out",
        s(&first),
    ]);
    let second = tmp.path().join("second");
    let replay = first.join("config.json");
    ok(&["simulate", "--config", s(&replay), "--out", s(&second)]);
    for name in ["report.json", "counts_AB.json", "pools.json"] {
        assert_eq!(
            std::fs::read(first.join(name)).unwrap(),
            std::fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn simulated_tables_feed_back_into_keyrate() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    ok(&[
        "simulate",
        "--preset",
        "desk",
        "--format",
        "csv",
        "--out",
        s(&out),
    ]);
    let report = read_json(&out.join("report.json"));
    let expected = report["keys"]["AB"]["secure_bits"].as_u64().unwrap();
    assert!(expected > 0);
    // The run's config supplies the intensities the table was drawn with.
    let stdout = ok(&[
        "keyrate",
        "--counts",
        s(&out.join("counts_AB.csv")),
        "--config",
        s(&out.join("config.json")),
    ])
    .stdout;
    let text = String::from_utf8(stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    let bits: u64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(bits, expected, "{text}");
}

#[test]
fn reference_presets_reproduce_their_figures() {
    for (preset, blocks, l_sig) in [
        ("published-mdi", 1974, 2_129_292u64),
        ("published-qkd", 2506, 96_775),
    ] {
        let out = ok(&["qds", "--preset", preset]);
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        let r = &v["outcome"];
        assert_eq!(r["status"], "secure", "{preset}");
        assert_eq!(r["n_signatures"], blocks, "{preset}");
        assert_eq!(v["extracted_blocks"], blocks, "{preset}");
        assert_eq!(r["l_sig"], l_sig, "{preset}");
        let summary = String::from_utf8(out.stderr).unwrap();
        assert!(summary.contains("reference"), "{summary}");
    }
}

#[test]
fn test_error_above_the_floor_reports_no_rate() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("noisy.toml");
    std::fs::write(
        &path,
        r#"link = "AB"
[inputs]
s1_sig_lower = 1000000.0
eph_sig_upper = 0.01
e_test = 0.2
pool_len = 100000000
total_time_s = 100.0
duty_fraction = 1.0
"#,
    )
    .unwrap();
    let out = ok(&["qds", "--config", s(&path)]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("no positive QDS rate"), "{stderr}");
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outcome"]["status"], "insecure");
}

#[test]
fn malformed_csv_names_the_row() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.csv");
    std::fs::write(
        &path,
        "link,intensity,basis,sent,detected,errors\n\
         AC,s,Z,1000,100,3\n\
         AC,u,X,1000,50,banana\n",
    )
    .unwrap();
    let out = mdiqds(&["keyrate", "--counts", s(&path)]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("row 3"), "{stderr}");
    assert!(stderr.contains("banana"), "{stderr}");
}

#[test]
fn dead_channel_sweep_is_all_zero() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("dead.toml");
    std::fs::write(
        &path,
        "distances = [0.0, 10.0, 20.0]\n[channel]\ndetector_efficiency = 0.0\n",
    )
    .unwrap();
    let out = ok(&["sweep", "--config", s(&path), "--format", "json"]);
    let points: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(points.len(), 6);
    for p in points {
        assert_eq!(p["secure_bits"], 0);
        assert_eq!(p["rate_bps"], 0.0);
    }
}

#[test]
fn default_sweep_falls_with_distance() {
    let out = ok(&["sweep", "--format", "json"]);
    let points: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    for mode in ["QKD", "MDI"] {
        let rates: Vec<f64> = points
            .iter()
            .filter(|p| p["mode"] == mode)
            .map(|p| p["rate_bps"].as_f64().unwrap())
            .collect();
        assert_eq!(rates.len(), 15);
        assert!(rates[0] > 0.0, "{mode}");
        assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{mode}: {rates:?}");
    }
}

#[test]
fn unknown_preset_lists_the_choices() {
    let out = mdiqds(&["qds", "--preset", "nope"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("published-mdi") && stderr.contains("desk"),
        "{stderr}"
    );
}
