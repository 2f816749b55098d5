use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn twisted(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twisted"))
        .args(args)
        .env_remove("TWISTED_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = twisted(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Rows of a CSV text keyed by first column.
fn row<'a>(text: &'a str, key: &str) -> Vec<&'a str> {
    text.lines().map(|l| l.split(',').collect::<Vec<_>>()).find(|r| r[0] == key).unwrap_or_else(|| panic!("no row {key}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .map(num)
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
#[allow(clippy::approx_constant)] // the literal is the input under test
fn region_iii_row_at_half_pi() {
    let theta: f64 = 1.5707963;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let expect = [2.0 * c + s, 2.0 * s - c, -s, c].map(|x| x / 6f64.sqrt());
    let text = stdout(&["regions", "--sign", "+", "--theta", "1.5707963"]);
    let r = row(&text, "III");
    for k in 0..4 {
        assert!((num(r[1 + 2 * k]) - expect[k]).abs() < 1e-11, "{k}: {}", r[1 + 2 * k]);
        assert_eq!(num(r[2 + 2 * k]), 0.0);
    }
}

#[test]
fn region_ii_minus_branch() {
    let text = stdout(&["regions", "--sign", "-", "--theta", "0"]);
    let r = row(&text, "II");
    let expect = [0.0, -1.0, 2.0, 1.0].map(|x| x / 6f64.sqrt());
    for k in 0..4 {
        assert!((num(r[1 + 2 * k]) - expect[k]).abs() < 1e-11);
    }
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn regions_json_has_density_matrices() {
    let text = stdout(&["regions", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let snaps = v["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 5);
    for s in snaps {
        assert_eq!(s["rho"]["dim"], 4);
        let re = s["rho"]["re"].as_array().unwrap();
        let tr: f64 = (0..4).map(|i| re[i][i].as_f64().unwrap()).sum();
        assert!((tr - 1.0).abs() < 1e-11);
    }
}

#[test]
fn malformed_theta_is_a_usage_error() {
    for bad in ["abc", "pi/0", ""] {
        let out = twisted(&["regions", "--theta", bad]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    assert_eq!(twisted(&["sweep", "--grid", "0:1:0"]).status.code(), Some(2));
    assert_eq!(twisted(&["tomo", "--shots", "0", "--out", "x"]).status.code(), Some(2));
    assert_eq!(twisted(&["regions", "--sign", "x"]).status.code(), Some(2));
}

#[test]
fn sweep_rows_at_half_pi() {
    let header = "theta,p00,p01,p10,p11,p_trigger1_cl,p_trigger0_cl,divergence";
    let plus = stdout(&["sweep", "--sign", "+", "--theta", "pi/2"]);
    let lines: Vec<&str> = plus.lines().collect();
    assert_eq!(lines[0], header);
    let r: Vec<f64> = lines[1].split(',').map(num).collect();
    assert!((r[4] - 1.0 / 12.0).abs() < 1e-11);
    assert!(r[5].abs() < 1e-12);
    assert!((r[7] - 1.0 / 12.0).abs() < 1e-11);

    let minus = stdout(&["sweep", "--sign", "-", "--theta", "pi/2"]);
    let r: Vec<f64> = minus.lines().nth(1).unwrap().split(',').map(num).collect();
    assert!((r[2] - 1.0 / 12.0).abs() < 1e-11);
    assert!(r[5].abs() < 1e-12);
}

#[test]
fn sweep_grid_sizes() {
    assert_eq!(stdout(&["sweep", "--grid", "0:pi/2:1"]).lines().count(), 2);
    assert_eq!(stdout(&["sweep"]).lines().count(), 92);
    let json = stdout(&["sweep", "--grid", "0:pi:5", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
    assert!(v[0]["divergence"].is_number());
}

fn tomo(dir: &Path, extra: &[&str]) -> String {
    let mut args = vec!["tomo", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    stdout(&args)
}

#[test]
fn tomo_fidelity_and_noise_bracket() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = tomo(tmp.path(), &["--region", "i", "--sign", "+", "--shots", "100000"]);
    assert!(field(&clean, "fidelity") >= 0.995, "{clean}");
    for f in ["counts.csv", "rho_rec.json", "rho_th.json", "summary.txt"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_to_string(tmp.path().join("summary.txt")).unwrap(), clean);

    let noisy = tomo(tmp.path(), &["--region", "i", "--noise", "0.03"]);
    let f = field(&noisy, "fidelity");
    assert!((0.95..=0.99).contains(&f), "{f}");
}

#[test]
fn tomo_single_shot_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = tomo(tmp.path(), &["--region", "iii", "--shots", "1"]);
    let f = field(&text, "fidelity");
    assert!((0.0..=1.0).contains(&f));
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let tmp = tempfile::tempdir().unwrap();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_twisted"));
        cmd.args(["tomo", "--shots", "200", "--out", tmp.path().to_str().unwrap()]).env_remove("TWISTED_SEED");
        if let Some(s) = env {
            cmd.env("TWISTED_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(tmp.path().join("counts.csv")).unwrap()
    };
    assert_eq!(run(Some("7"), None), run(None, Some("7")));
    assert_ne!(run(Some("7"), None), run(None, None));
    assert_eq!(run(Some("7"), Some("3")), run(None, Some("3")));
}

#[test]
fn counts_round_trip_reproduces_reconstruction() {
    let tmp = tempfile::tempdir().unwrap();
    tomo(tmp.path(), &["--region", "ii", "--sign", "-", "--shots", "5000", "--seed", "11"]);
    let out = tmp.path().join("again.json");
    let text = stdout(&[
        "reconstruct",
        "--counts",
        tmp.path().join("counts.csv").to_str().unwrap(),
        "--region",
        "ii",
        "--sign",
        "-",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(out).unwrap(), fs::read(tmp.path().join("rho_rec.json")).unwrap());
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert_eq!(field(&text, "fidelity"), field(&summary, "fidelity"));
}

#[test]
fn reconstruct_rejects_bad_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "basis_a,basis_b,shots,n00,n01,n10,n11\nZ,Z,3,1,1,0,0\n").unwrap();
    let out = twisted(&["reconstruct", "--counts", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
    let missing = twisted(&["reconstruct", "--counts", tmp.path().join("none.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn discriminate_report() {
    let text = stdout(&["discriminate", "--theta", "pi/2"]);
    assert!((field(&text, "helstrom") - 0.971404520791).abs() < 1e-11);
    assert!((field(&text, "rule_success") - 0.1).abs() < 1e-11);
    assert!(text.contains("within_helstrom=true"));
    let json: serde_json::Value = serde_json::from_str(&stdout(&["discriminate", "--format", "json"])).unwrap();
    assert!((json["helstrom"].as_f64().unwrap() - 0.971404520791).abs() < 1e-11);
}

#[test]
fn optics_check_passes_and_catches_a_wrong_plate() {
    let ok = stdout(&["optics-check", "--sign", "+"]);
    assert_eq!(ok.lines().filter(|l| l.starts_with("region ") && l.ends_with(" PASS")).count(), 3);

    let bad = twisted(&["optics-check", "--sign", "+", "--hwp-int-angle", "pi/8"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.lines().any(|l| l.contains("overlap=") && l.ends_with(" FAIL")), "{text}");
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("missing").join("regions.csv");
    let out = twisted(&["regions", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = twisted(&["tomo", "--shots", "10", "--out", blocker.join("d").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn file_output_matches_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("sweep.csv");
    stdout(&["sweep", "--grid", "0:pi:7", "--out", path.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(path).unwrap(), stdout(&["sweep", "--grid", "0:pi:7"]));
}
