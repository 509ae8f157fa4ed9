use std::path::Path;
use std::process::{Command, Output};

fn irtmpt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irtmpt"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn generate(dir: &Path, name: &str, case: &str, seed: &str) {
    let o = irtmpt(dir, &["generate", "--T", "2", "--K", "3", "--case", case, "--seed", seed, "-o", name]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_writes_verified_bundle() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "pair.json", "theta6-zero", "1");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("pair.json")).unwrap()).unwrap();
    assert!(v["max_dist_distribution"].as_f64().unwrap() <= 1e-12);
    assert!(v["max_dist_params"].as_f64().unwrap() >= 1e-3);
}

#[test]
fn generate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "a.json", "delta6-zero", "5");
    generate(dir.path(), "b.json", "delta6-zero", "5");
    assert_eq!(std::fs::read(dir.path().join("a.json")).unwrap(), std::fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let o = irtmpt(dir.path(), &["generate", "--T", "2", "--K", "3", "--case", "neither", "--seed", "1"]);
    assert_eq!(code(&o), 64);
    assert_eq!(code(&irtmpt(dir.path(), &["generate", "--T", "2"])), 64);
    assert_eq!(code(&irtmpt(dir.path(), &["frobnicate"])), 64);
    let o = irtmpt(dir.path(), &["generate", "--T", "1", "--K", "3", "--case", "both-zero", "--seed", "1"]);
    assert_eq!(code(&o), 64);
    assert_eq!(code(&irtmpt(dir.path(), &["--help"])), 0);
}

#[test]
fn generation_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = irtmpt(
        dir.path(),
        &["generate", "--T", "2", "--K", "3", "--case", "theta6-zero", "--seed", "1", "--eta-margin", "0.95", "--retries", "5", "-o", "x.json"],
    );
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn verify_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "pair.json", "theta6-zero", "1");
    assert_eq!(code(&irtmpt(dir.path(), &["verify", "pair.json"])), 0);

    let path = dir.path().join("pair.json");
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let x = v["omega_prime_table"]["psi5"][0][0].as_f64().unwrap();
    v["omega_prime_table"]["psi5"][0][0] = serde_json::json!(x + 0.01);
    std::fs::write(dir.path().join("bad.json"), serde_json::to_vec(&v).unwrap()).unwrap();
    let o = irtmpt(dir.path(), &["verify", "bad.json"]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8_lossy(&o.stdout);
    let flagged: Vec<&str> = text.lines().filter(|l| l.ends_with("FAIL") && !l.starts_with("max_dist")).collect();
    assert_eq!(flagged.len(), 1, "{text}");
    assert!(flagged[0].starts_with("selection_odds"), "{text}");
}

#[test]
fn distribution_csv_rows_and_stability() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "pair.json", "both-zero", "7");
    assert_eq!(code(&irtmpt(dir.path(), &["distribution", "pair.json", "-o", "d.csv"])), 0);
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,k,C,S,F,M,U,N,AN,NA");
    assert_eq!(lines.len(), 7);
    for l in &lines[1..] {
        let s: f64 = l.split(',').skip(2).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() <= 1e-14);
    }
    let (t, k, dists) = irtmpt::io::read_distribution(&dir.path().join("d.csv")).unwrap();
    assert_eq!((t, k), (2, 3));
    assert_eq!(irtmpt::io::distribution_csv(k, &dists), text.as_bytes());
}

#[test]
fn zero_params_match_half_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let params = irtmpt::io::ParamsFile::from(&irtmpt::params::IrtParams::zeros(2, 3));
    std::fs::write(dir.path().join("z.json"), irtmpt::io::to_json_string(&params)).unwrap();
    let o = irtmpt(dir.path(), &["distribution", "z.json"]);
    assert_eq!(code(&o), 0);
    let want = [0.015625, 0.0625, 0.0625, 0.015625, 0.21875, 0.03125, 0.09375, 0.5];
    for l in String::from_utf8_lossy(&o.stdout).lines().skip(1) {
        let got: Vec<f64> = l.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-15);
        }
    }
}

#[test]
fn malformed_input_exits_65_with_context() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"T\": 2,\n  \"K\": 3,\n  \"theta\": 5\n}\n").unwrap();
    let o = irtmpt(dir.path(), &["distribution", "bad.json", "-o", "out.csv"]);
    assert_eq!(code(&o), 65);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json") && err.contains("line 4"), "{err}");
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn simulate_and_loglik_agree_across_pair() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "pair.json", "theta6-zero", "3");
    assert_eq!(code(&irtmpt(dir.path(), &["simulate", "pair.json", "--n", "1000", "--seed", "9", "-o", "c.csv"])), 0);
    let ll = |member: &str| {
        let o = irtmpt(dir.path(), &["loglik", "pair.json", "--member", member, "c.csv"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let s = String::from_utf8_lossy(&o.stdout).trim().to_owned();
        assert_eq!(s.split('.').nth(1).unwrap().len(), 12);
        s.parse::<f64>().unwrap()
    };
    assert!((ll("omega") - ll("omega-prime")).abs() <= 1e-9);

    assert_eq!(code(&irtmpt(dir.path(), &["simulate", "pair.json", "--n", "1", "--seed", "9", "-o", "one.csv"])), 0);
    let text = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    for l in text.lines().skip(1) {
        let total: u64 = l.split(',').skip(2).map(|x| x.parse::<u64>().unwrap()).sum();
        assert_eq!(total, 1);
    }
}

#[test]
fn loglik_dimension_mismatch_exits_65() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "pair.json", "theta6-zero", "3");
    let o = irtmpt(dir.path(), &["generate", "--T", "3", "--K", "3", "--case", "theta6-zero", "--seed", "3", "-o", "big.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&irtmpt(dir.path(), &["simulate", "big.json", "--n", "10", "--seed", "1", "-o", "c.csv"])), 0);
    assert_eq!(code(&irtmpt(dir.path(), &["loglik", "pair.json", "c.csv"])), 65);
}

#[test]
fn rank_generic_and_both_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&irtmpt(dir.path(), &["random", "--T", "3", "--K", "4", "--seed", "2", "-o", "r.json"])), 0);
    let rank = |file: &str, extra: &[&str]| {
        let mut args = vec!["rank", file];
        args.extend_from_slice(extra);
        let o = irtmpt(dir.path(), &args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()
    };
    let r = rank("r.json", &[]);
    assert_eq!(r["deficiency"], 0);
    assert_eq!(r["rank"], 38);
    assert!(rank("r.json", &["--cutoff", "0.5"])["rank"].as_u64().unwrap() < 38);

    let o = irtmpt(dir.path(), &["generate", "--T", "3", "--K", "4", "--case", "both-zero", "--seed", "2", "-o", "b.json"]);
    assert_eq!(code(&o), 0);
    assert!(rank("b.json", &[])["deficiency"].as_u64().unwrap() >= 1);
    assert_eq!(String::from_utf8_lossy(&irtmpt(dir.path(), &["classify", "b.json"]).stdout).trim(), "both-zero");
    assert_eq!(String::from_utf8_lossy(&irtmpt(dir.path(), &["classify", "r.json"]).stdout).trim(), "neither");
}

#[test]
fn report_lists_partner() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "pair.json", "theta6-zero", "4");
    let o = irtmpt(dir.path(), &["report", "pair.json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["partner"]["max_dist_distribution"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["case"], "ThetaSixZero");
}
