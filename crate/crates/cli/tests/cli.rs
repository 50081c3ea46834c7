use std::process::{Command, Output};

fn fastrate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastrate")).args(args).output().unwrap()
}

#[test]
fn invalid_input_exits_2() {
    let o = fastrate(&["rate-exp", "--p", "0.5", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fastrate(&["bound", "--form", "main", "--n", "100", "--kl", "1", "--eta", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resource_limit_exits_3() {
    let o = fastrate(&["cmi", "--n", "6"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn rate_csv_header_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rate.csv");
    let o = fastrate(&["rate-exp", "--ns", "16,32", "--trials", "3", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "n,trial,gap,emp_excess,fast_complexity,main_bound_total,inprob_total,baseline_pb,baseline_mi_proxy,covered"
    );
    assert_eq!(text.lines().count(), 7);

    let svg = dir.path().join("rate.svg");
    let o = fastrate(&["plot", "--input", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    // flip one coverage flag
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[4] = if lines[4].ends_with("true") { lines[4].replace(",true", ",false") } else { lines[4].replace(",false", ",true") };
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let o = fastrate(&["plot", "--input", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn json_problem_document() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"domain": [0, 1, 2], "dist": [0.2, 0.3, 0.5], "noise_p": 0.1, "class": "thresholds", "t_star": 1}"#).unwrap();
    let o = fastrate(&["bernstein", "--problem", path.to_str().unwrap(), "--beta", "1"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let b: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((b - 1.25).abs() < 1e-12);
}
