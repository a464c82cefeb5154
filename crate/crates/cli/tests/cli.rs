use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sparc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparc"))
        .args(args)
        .output()
        .expect("run sparc binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_raw(path: &Path, samples: &[f64]) {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).unwrap();
}

fn read_raw(path: &Path) -> Vec<f64> {
    fs::read(path)
        .unwrap()
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn wave(len: usize) -> Vec<f64> {
    (0..len).map(|k| (k as f64 * 0.37).sin() * 1.3 + (k as f64 * 0.011).cos() * 0.4).collect()
}

#[test]
fn params_prints_published_block_length() {
    let o = sparc(&["params", "--rate-bits", "2.092", "--b", "3", "--L", "66"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 572);
    assert_eq!(v["M"], 287_496);
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 66);
}

#[test]
fn params_accepts_nats_and_csv() {
    let o = sparc(&["params", "--rate-nats", "0.5", "--b", "2", "--L", "10", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("n,L,M,b,rate_nats"));
    assert!(text.lines().nth(1).unwrap().starts_with("92,10,100,2,"));
}

#[test]
fn encode_decode_roundtrip_raw_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.f64");
    let packed = dir.path().join("x.sparc");
    let back = dir.path().join("y.f64");
    let x = wave(500);
    write_raw(&input, &x);
    let o = sparc(&[
        "encode", "--rate-bits", "1.5", "--b", "2", "--L", "12", "--seed", "4",
        "-i", input.to_str().unwrap(), "-o", packed.to_str().unwrap(), "--estimate-variance",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["samples"], 500);
    let o = sparc(&["decode", "-i", packed.to_str().unwrap(), "-o", back.to_str().unwrap()]);
    assert!(o.status.success());
    let y = read_raw(&back);
    assert_eq!(y.len(), 500);
    let mse = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 500.0;
    assert!((mse - report["distortion"].as_f64().unwrap()).abs() < 1e-12);

    // the same samples via CSV give the same container
    let csv_in = dir.path().join("x.csv");
    let mut text = String::from("value\n");
    for v in &x {
        text.push_str(&format!("{v:?}\n"));
    }
    fs::write(&csv_in, text).unwrap();
    let packed2 = dir.path().join("x2.sparc");
    let o = sparc(&[
        "encode", "--rate-bits", "1.5", "--b", "2", "--L", "12", "--seed", "4",
        "-i", csv_in.to_str().unwrap(), "-o", packed2.to_str().unwrap(), "--estimate-variance",
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(&packed).unwrap(), fs::read(&packed2).unwrap());
    let out_csv = dir.path().join("y.csv");
    assert!(sparc(&["decode", "-i", packed2.to_str().unwrap(), "-o", out_csv.to_str().unwrap()]).status.success());
    let parsed: Vec<f64> = fs::read_to_string(&out_csv).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(parsed, y);
}

#[test]
fn sweep_csv_is_reproducible() {
    let args = ["sweep", "--rate-bits", "0.8,1.2", "--b", "2", "--L", "10", "--trials", "5", "--seed", "3"];
    let a = sparc(&args);
    let b = sparc(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("rate_bits,mean_distortion,stderr,d_star,ecsq,b,L,n,rule,trials,seed"));
    assert!(!text.contains("wall_time_s"));
    let timed = sparc(&[&args[..], &["--timing", "--jobs", "1"]].concat());
    assert!(stdout(&timed).lines().next().unwrap().ends_with("wall_time_s"));
}

#[test]
fn sweep_from_config_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    let cfg = serde_json::json!({
        "points": [
            {"rate_bits": 1.0, "b": 2, "L": 8, "trials": 3, "rule": "max-corr",
             "source": {"kind": "laplacian"}, "master_seed": 1},
            {"rate_bits": 1.0, "b": 2, "L": 8, "trials": 3,
             "source": {"kind": "gauss-markov", "rho": 0.5}, "master_seed": 1}
        ],
        "output": {"csv": csv.to_str().unwrap(), "json": json.to_str().unwrap()}
    });
    let path = dir.path().join("cfg.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let o = sparc(&["sweep", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
    assert_eq!(v["points"][0]["distortions"].as_array().unwrap().len(), 3);
}

#[test]
fn bounds_reports_probabilities() {
    let o = sparc(&[
        "bounds", "--rate-bits", "1", "--b", "2", "--L", "2", "--M", "4", "--n", "100",
        "--delta0", "0.1", "--delta1", "0.5", "--delta2", "1.0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p1 = v["bounds"]["p1"].as_f64().unwrap();
    assert!((p1 - 0.702_990_937_974_518_7).abs() < 1e-12);
}

#[test]
fn oracle_compare_runs_clean() {
    let o = sparc(&["oracle-compare", "--instances", "40", "--seed", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["instances"], 40);
    assert_eq!(v["dominance_violations"], 0);
}

#[test]
fn exit_codes() {
    // usage
    assert_eq!(sparc(&[]).status.code(), Some(1));
    assert_eq!(sparc(&["params", "--b", "3"]).status.code(), Some(1));
    assert_eq!(sparc(&["params", "--rate-bits", "1", "--rule", "nope"]).status.code(), Some(1));
    assert_eq!(sparc(&["sweep", "--rule", "fastest"]).status.code(), Some(1));
    // impossible parameters
    assert_eq!(sparc(&["params", "--rate-bits", "4", "--L", "2"]).status.code(), Some(1));
    assert_eq!(sparc(&["--help"]).status.code(), Some(0));

    // data errors
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.sparc");
    fs::write(&junk, b"not a container at all").unwrap();
    let out = dir.path().join("out.f64");
    assert_eq!(
        sparc(&["decode", "-i", junk.to_str().unwrap(), "-o", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let odd = dir.path().join("odd.f64");
    fs::write(&odd, [0u8; 13]).unwrap();
    assert_eq!(
        sparc(&["encode", "--rate-bits", "1", "--L", "4", "--b", "2", "-i", odd.to_str().unwrap(), "-o", out.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.f64");
    assert_eq!(
        sparc(&["decode", "-i", missing.to_str().unwrap(), "-o", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let bad_cfg = dir.path().join("cfg.json");
    fs::write(&bad_cfg, "{\"points\": 3}").unwrap();
    assert_eq!(sparc(&["sweep", "--config", bad_cfg.to_str().unwrap()]).status.code(), Some(1));
}
