use std::path::Path;
use std::process::{Command, Output};

fn echochain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echochain"))
        .args(args)
        .env("ECHOCHAIN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn rows(out: &Output) -> Vec<Vec<String>> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn header(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).lines().next().unwrap_or("").to_owned()
}

fn column(out: &Output, name: &str) -> Vec<f64> {
    let head = header(out);
    let idx = head.split(',').position(|c| c == name).expect("column present");
    rows(out).iter().map(|r| r[idx].parse().unwrap()).collect()
}

#[test]
fn echo_single_point() {
    let out = echochain(&["echo", "--n", "3", "--t-max", "0", "--points", "1"]);
    assert_eq!(header(&out), "series,n,j,t,N,mode,v,seed,dt,f_ec,I_ec");
    assert_eq!(column(&out, "f_ec"), vec![1.0]);
}

#[test]
fn echo_curve_revives() {
    let out = echochain(&["echo", "--n", "10", "--j", "1", "--t-max", "3", "--points", "60", "--steps", "16"]);
    let f = column(&out, "f_ec");
    assert_eq!(f.len(), 60);
    assert!(f.iter().all(|x| (x - 1.0).abs() < 1e-9));
}

#[test]
fn echo_with_meanfield_has_two_series() {
    let out = echochain(&[
        "echo", "--n", "10", "--points", "6", "--with-meanfield", "--schedule", "mirrored-pulse", "--dt", "0.01",
    ]);
    let series: Vec<String> = rows(&out).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(series.iter().filter(|s| *s == "quantum").count(), 6);
    assert_eq!(series.iter().filter(|s| *s == "meanfield").count(), 6);
}

#[test]
fn transfer_examples() {
    let out = echochain(&["transfer", "--n", "5", "--t-max", "0", "--points", "1"]);
    assert_eq!(header(&out), "n,t,N,engine,v,seed,f_tr,I_tr");
    assert!(column(&out, "f_tr")[0].abs() < 1e-12);

    let out = echochain(&["transfer", "--n", "2", "--engine", "exact", "--points", "5"]);
    assert!(column(&out, "f_tr").iter().all(|f| (f - 1.0).abs() < 1e-12));

    let out = echochain(&["transfer", "--n", "6", "--engine", "exact", "--t-max", "1.5708", "--points", "50"]);
    let f = column(&out, "f_tr");
    assert_eq!(f.len(), 50);
    assert!(*f.last().unwrap() > 0.999);
    assert!(f.iter().all(|x| *x <= f.last().unwrap() + 1e-12));
}

#[test]
fn trotter_transfer_calibrates_steps() {
    let out = echochain(&["transfer", "--n", "6", "--engine", "trotter-simfm", "--points", "1"]);
    let steps = column(&out, "N")[0];
    assert!(steps >= 1.0);
    assert!(1.0 - column(&out, "f_tr")[0] < 1e-4);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["robustness", "--trials", "0"],
        vec!["echo", "--n", "2"],
        vec!["echo", "--bogus"],
        vec!["transfer", "--engine", "magic"],
        vec!["transfer", "--engine", "exact", "--v", "0.1"],
        vec!["echo", "--n", "20"],
        vec!["robustness", "--n-range", "9:4"],
        vec!["echo", "--t-max", "30", "--steps", "1", "--points", "1"],
    ] {
        let out = echochain(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn help_exits_0() {
    assert_eq!(echochain(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("echo.json");
    std::fs::write(&cfg, r#"{"n": 5, "points": 3, "t_max": 1.5, "steps": 4}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let out = echochain(&["echo", "--config", cfg]);
    let r = rows(&out);
    assert_eq!(r.len(), 3);
    assert!(r.iter().all(|row| row[1] == "5"));

    let out = echochain(&["echo", "--config", cfg, "--n", "7"]);
    assert!(rows(&out).iter().all(|row| row[1] == "7"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n": 5, "colour": "blue"}"#).unwrap();
    let out = echochain(&["echo", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = echochain(&["echo", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plotting_leaves_csv_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain.csv");
    let plotted = dir.path().join("plotted.csv");
    let svg = dir.path().join("echo.svg");
    let base = ["echo", "--n", "6", "--points", "5", "--with-meanfield", "--dt", "0.01", "--out"];
    let mut a = base.to_vec();
    a.push(plain.to_str().unwrap());
    assert!(echochain(&a).status.success());
    let mut b = base.to_vec();
    b.extend([plotted.to_str().unwrap(), "--plot", svg.to_str().unwrap()]);
    assert!(echochain(&b).status.success());
    assert_eq!(std::fs::read(&plain).unwrap(), std::fs::read(&plotted).unwrap());
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn robustness_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = echochain(&[
        "robustness", "--protocol", "echo", "--n", "6", "--v-points", "5", "--trials", "10", "--seed", "42", "--out-dir",
        out_dir, "--plot",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trials = read_csv(&dir.path().join("trials.csv"));
    assert_eq!(trials.len(), 50);
    assert!(trials.iter().all(|r| {
        let i: f64 = r[7].parse().unwrap();
        (-1e-12..=1.0 + 1e-12).contains(&i)
    }));
    let head = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert!(head.starts_with("protocol,n,t,N,v,trial,seed,infidelity\n"));
    let fits = std::fs::read_to_string(dir.path().join("fits.csv")).unwrap();
    assert!(fits.starts_with("protocol,n,a,b,r_squared,points\n"));
    let fit = &read_csv(&dir.path().join("fits.csv"))[0];
    assert!(fit[4].parse::<f64>().unwrap() >= 0.95);
    assert!(dir.path().join("loglog.svg").exists());
    assert!(dir.path().join("slopes.svg").exists());
}

#[test]
fn robustness_transfer_parity_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = echochain(&[
        "robustness", "--protocol", "transfer", "--n-range", "4:5", "--v-points", "4", "--trials", "4", "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("even n slopes: 4:"));
    assert!(stderr.contains("odd n slopes: 5:"));
    assert_eq!(read_csv(&dir.path().join("fits.csv")).len(), 2);
}

#[test]
fn oracle_check_passes_and_catches_faults() {
    let out = echochain(&["oracle-check", "--cases", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let out = echochain(&["oracle-check", "--max-n", "8", "--trotter-steps", "4,8,16"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ratios: Vec<f64> = report["scaling"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|r| r["ratio"].as_f64())
        .collect();
    assert_eq!(ratios.len(), 2);
    assert!(ratios.iter().all(|r| (3.0..=5.5).contains(r)), "{ratios:?}");

    let out = echochain(&["oracle-check", "--cases", "50", "--inject-fault", "flip-theta-sign"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gate-identity"));

    assert_eq!(echochain(&["oracle-check", "--trotter-steps", "8"]).status.code(), Some(2));
}
