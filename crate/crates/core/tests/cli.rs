use std::process::{Command, Output};

fn shwx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shwx"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn run_writes_json_with_config_echo() {
    let out = shwx(&[
        "run",
        "32",
        "--ranks",
        "4",
        "--threads",
        "2",
        "--steps",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["spec"]["n"], 32);
    assert_eq!(v["flops"], 65 * 32 * 32 * 5);
    assert_eq!(v["args"][0], "run");
    for key in ["timing", "rate_gflops", "traffic", "conservation"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let echoed: Vec<String> = serde_json::from_value(v["args"].clone()).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_shwx"))
        .args(&echoed)
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(0));
}

#[test]
fn csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let out = shwx(&[
        "run",
        "16",
        "--steps",
        "20",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 1 + 3);
}

#[test]
fn exit_codes() {
    assert_eq!(shwx(&["run"]).status.code(), Some(1));
    assert_eq!(
        shwx(&["run", "64", "--placement", "scatter"]).status.code(),
        Some(1)
    );
    assert_eq!(
        shwx(&["run", "64", "--ranks", "4", "--hblocks", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        shwx(&["run", "16", "--fabric", "/no/such/model.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(shwx(&["--help"]).status.code(), Some(0));
    assert_eq!(
        shwx(&[
            "run",
            "16",
            "--ranks",
            "2",
            "--fault",
            "1:1:1e300",
            "--steps",
            "5"
        ])
        .status
        .code(),
        Some(3)
    );
}

#[test]
fn verify_passes_and_canary_fails() {
    let ok = shwx(&["verify", "16", "--steps", "5"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 6);

    let only = shwx(&["verify", "16", "--check", "mass"]);
    let v: serde_json::Value = serde_json::from_slice(&only.stdout).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);

    let canary = shwx(&[
        "verify",
        "16",
        "--steps",
        "5",
        "--check",
        "oracle",
        "--inject-fault",
        "1e-6",
    ]);
    assert_eq!(canary.status.code(), Some(2));
}

#[test]
fn topo_formats() {
    let text = shwx(&[
        "topo",
        "--ranks",
        "6",
        "--devices",
        "2",
        "--hblocks",
        "3",
        "--format",
        "text",
    ]);
    let s = String::from_utf8(text.stdout).unwrap();
    assert!(s.contains("remote fraction 0.5\n"));
    let csv = shwx(&["topo", "--ranks", "6", "--devices", "2", "--format", "csv"]);
    let s = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(s.lines().count(), 1 + 2 * 24);
}

#[test]
fn tune_writes_plot_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("m.csv");
    let out = shwx(&[
        "tune",
        "32",
        "--cores",
        "4",
        "--steps",
        "3",
        "--format",
        "csv",
        "--emit-plot-data",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = String::from_utf8(out.stdout).unwrap();
    assert!(rows.starts_with("n,m,t,h,r,rate,time,status\n"));
    assert_eq!(rows.lines().count(), 1 + 6);
    let m = std::fs::read_to_string(plot).unwrap();
    assert_eq!(m.lines().next().unwrap(), "t,h1,h2,h4");
}
