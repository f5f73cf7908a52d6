use std::process::{Command, Output};

fn fracexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracexp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

#[test]
fn coeff_json_value() {
    let o = fracexp(&["coeff", "--word", "011", "--hurst", "0.75", "--method", "analytic"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!((v["value"].as_f64().unwrap() - 0.2).abs() < 1e-9);
    assert_eq!(v["config"]["word"], "011");
    assert_eq!(v["config"]["command"], "coeff");

    let o = fracexp(&["coeff", "--word", "1", "--hurst", "0.7", "--method", "analytic"]);
    assert_eq!(json(&o)["value"].as_f64(), Some(0.0));
}

#[test]
fn var_scan_csv_limit() {
    let o = fracexp(&["var-scan", "--t", "1", "--hurst", "0.7", "--alpha", "0.7", "--h-grid", "1e-2,1e-3,1e-4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "h,raw_var,normalized,ratio_to_limit");
    assert_eq!(data.len(), 4);
    let ratio: f64 = data[3].split(',').nth(3).unwrap().parse().unwrap();
    assert!((0.98..=1.02).contains(&ratio), "{ratio}");
    assert!(text.lines().any(|l| l == "# command = var-scan"));
}

#[test]
fn expand_csv_header_and_terms() {
    let o = fracexp(&["expand", "--f", "x^2", "--x0", "1", "--hurst", "0.7", "--p", "1", "--q", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "m,n,exponent,coefficient");
    let last: Vec<f64> = data[2].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(&last[..2], &[1.0, 0.0]);
    assert!((last[3] - 1.0).abs() < 1e-12);
}

#[test]
fn cond_expand_json() {
    let o = fracexp(&[
        "cond-expand", "--f", "x", "--t", "1", "--beta", "-0.5", "--hurst", "0.7", "--p", "1", "--q", "1", "--format", "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let first = &v["terms"][0];
    assert_eq!((first["m"].as_u64(), first["n"].as_u64()), (Some(0), Some(1)));
    assert!((first["coefficient"].as_f64().unwrap() + 0.35).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    // Usage error from the argument parser.
    assert_eq!(fracexp(&["coeff", "--hurst", "0.7"]).status.code(), Some(2));
    assert_eq!(fracexp(&["coeff", "--word", "01", "--hurst", "0.7", "--bogus", "1"]).status.code(), Some(2));
    // Invalid word.
    assert_eq!(fracexp(&["coeff", "--word", "012", "--hurst", "0.7"]).status.code(), Some(2));
    // Hurst index outside (1/2, 1).
    let o = fracexp(&["sigma2", "--hurst", "0.3"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!o.stderr.is_empty() && o.stdout.is_empty());
    // Analytic guard exceeded.
    assert_eq!(fracexp(&["coeff", "--word", "000011", "--hurst", "0.7"]).status.code(), Some(3));
    // Syntax error in an expression.
    assert_eq!(
        fracexp(&["expand", "--f", "sin(", "--x0", "0", "--hurst", "0.7", "--p", "1", "--q", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn help_states_word_order() {
    let o = fracexp(&["coeff", "--help"]);
    assert!(stdout(&o).contains("innermost integral first"));
}

#[test]
fn fbm_sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = fracexp(&[
            "fbm-sample", "--hurst", "0.7", "--points", "65", "--paths", "3", "--seed", "5", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "t,path0,path1,path2");
    assert_eq!(data.len(), 66);
}

#[test]
fn solve_methods_agree() {
    let run = |method: &str| -> Vec<f64> {
        let o = fracexp(&[
            "solve", "--f-none", "--b", "tanh(x)", "--x0", "0.5", "--hurst", "0.7", "--steps", "2048", "--method", method,
            "--format", "json",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        json(&o)["x"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    let (e, d) = (run("euler"), run("doss"));
    assert_eq!(e.len(), 2049);
    let sup = e.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(sup < 1e-2, "{sup}");
}

#[test]
fn mc_check_and_r_fn() {
    let o = fracexp(&[
        "mc-check", "--f", "x", "--b", "0.5", "--x0", "0", "--hurst", "0.7", "--h-grid", "0.1,0.05", "--samples", "2000",
        "--steps", "64",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "h,mc,stderr,truncation,difference");
    assert_eq!(data.len(), 3);

    let o = fracexp(&["r-fn", "--hurst", "0.7", "--x-grid", "0.5,2", "--format", "json"]);
    let v = json(&o);
    let r: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["r"].as_f64().unwrap()).collect();
    assert!((r[0] - r[1]).abs() < 1e-8);
}
