use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SQRT5: &str = "2.23606797749979";

fn ermakov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ermakov")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header and numeric rows of a CSV document.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn oscillating_field_closes_after_three_periods() {
    // Ω₀ = 3, Ω₁ = 5, τ = π/5; δπ/Ω₀ = 4π/3 per period, so p = 3
    let m = 300;
    let tau_p = 3.0 * PI / 5.0;
    let t_max = format!("{:.17e}", 2.0 * tau_p);
    let points = (2 * m + 1).to_string();
    let text = stdout(&ermakov(&[
        "evolve", "--family", "oscillating", "--g-re", SQRT5, "--delta", "4", "--kappa", "0.6", "--Delta", "1",
        "--t-max", &t_max, "--points", &points,
    ]));
    let (h, rows) = parse_csv(&text);
    let re = column(&h, &rows, "re_r");
    let im = column(&h, &rows, "im_r");
    let inversion = column(&h, &rows, "inversion");
    for k in 0..=m {
        let scale = re[k].hypot(im[k]);
        assert!((re[k + m] - re[k]).abs() < 1e-9 * scale && (im[k + m] - im[k]).abs() < 1e-9 * scale, "row {k}");
        assert!((inversion[k + m] - inversion[k]).abs() < 1e-10);
    }
    // after one and two μ-periods the field has not returned
    for j in [1, 2] {
        let k = j * m / 3;
        assert!((re[k] - re[0]).hypot(im[k] - im[0]) > 0.1, "closed early at {j} periods");
    }
}

#[test]
fn resonant_circular_inversion_is_cos_2t() {
    let text = stdout(&ermakov(&[
        "evolve", "--family", "circular", "--g-re", "1", "--delta", "0", "--t-max", "10", "--points", "501",
    ]));
    let (h, rows) = parse_csv(&text);
    let t = column(&h, &rows, "t");
    let p = column(&h, &rows, "inversion");
    for (t, p) in t.iter().zip(&p) {
        assert!((p - (2.0 * t).cos()).abs() < 1e-10, "t = {t}: {p}");
    }
}

#[test]
fn usage_errors_exit_with_2() {
    let base = ["evolve", "--family", "circular", "--g-re", "1", "--delta", "0"];
    for extra in [&["--points", "1"][..], &["--points", "0"], &["--t-max", "-1"], &["--kappa", "1"]] {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        assert_eq!(code(&ermakov(&args)), 2, "{extra:?}");
    }
    assert_eq!(code(&ermakov(&["evolve", "--family", "elliptic", "--g-re", "1", "--delta", "0"])), 2);
    assert_eq!(code(&ermakov(&["evolve", "--family", "circular", "--delta", "0"])), 2);
    assert_eq!(code(&ermakov(&["evolve", "--family", "circular", "--g-re", "0", "--delta", "0"])), 2);
    assert_eq!(code(&ermakov(&["evolve", "--config", "/nonexistent/config.json"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"family": "circular", "g": 1}"#).unwrap();
    assert_eq!(code(&ermakov(&["evolve", "--config", bad.to_str().unwrap()])), 2);

    let oversized = ermakov(&[
        "scan", "--family", "circular", "--g-re", "1", "--delta", "1", "--scan-g-re", "0.1:1:101", "--scan-delta",
        "0.1:1:100",
    ]);
    assert_eq!(code(&oversized), 2);
}

fn scan_rows(extra: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut args = vec!["scan", "--family", "oscillating", "--g-re", SQRT5, "--delta", "4", "--Delta", "1"];
    args.extend_from_slice(extra);
    parse_csv(&stdout(&ermakov(&args)))
}

#[test]
fn kappa_scan_keeps_period_multiple_and_inversion_minimum() {
    let (h, rows) = scan_rows(&["--kappa", "1", "--scan-kappa", "0.6,1,3.1"]);
    assert_eq!(rows.len(), 3);
    let kappa = column(&h, &rows, "kappa");
    for (k, expected) in kappa.iter().zip([0.6, 1.0, 3.1]) {
        assert!((k - expected).abs() < 1e-14, "{k}");
    }
    assert_eq!(column(&h, &rows, "p"), vec![3.0; 3]);
    // P_min = (δ² − 4|g|²)/(δ² + 4|g|²) = −1/9 for every κ
    for p_min in column(&h, &rows, "p_min") {
        assert!((p_min + 1.0 / 9.0).abs() < 1e-14, "{p_min}");
    }
    for (w, k) in column(&h, &rows, "omega1").iter().zip(&kappa) {
        assert!((w * k - 3.0).abs() < 1e-13);
    }
}

#[test]
fn aperiodic_detuning_reports_none() {
    // δπ/Ω₀ with δ = 1, Ω₀ = √1.25 is not a rational multiple of 2π with small p
    let out = stdout(&ermakov(&[
        "scan", "--family", "oscillating", "--g-re", "1", "--delta", "1", "--kappa", "0.5", "--max-p", "64",
    ]));
    let (h, rows) = parse_csv(&out);
    let p = h.iter().position(|c| c == "p").unwrap();
    assert_eq!(rows[0][p], "none");
}

#[test]
fn single_cell_scan_equals_run_summary() {
    for family in [
        &["--family", "oscillating", "--kappa", "0.8"][..],
        &["--family", "circular"],
        &["--family", "decaying"],
        &["--family", "custom-pinney", "--omega1", "2.5"],
    ] {
        let mut common = vec!["--g-re", "1.3", "--g-im", "-0.4", "--delta", "2", "--Delta", "0.5", "--points", "20"];
        common.extend_from_slice(family);
        let scan = stdout(&ermakov(&[&["scan"][..], &common].concat()));
        let (h, rows) = parse_csv(&scan);
        assert_eq!(rows.len(), 1);
        let report: serde_json::Value =
            serde_json::from_str(&stdout(&ermakov(&[&["verify"][..], &common].concat()))).unwrap();
        let summary = &report["summary"];
        for (name, cell) in h.iter().zip(&rows[0]) {
            let value = &summary[name.as_str()];
            match (cell.as_str(), value) {
                ("none", v) => assert!(v.is_null(), "{name}"),
                (text, serde_json::Value::String(s)) => assert_eq!(text, s),
                (text, v) => assert_eq!(text.parse::<f64>().unwrap(), v.as_f64().unwrap(), "{family:?} {name}"),
            }
        }
    }
}

#[test]
fn output_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["evolve", "--family", "oscillating", "--g-re", SQRT5, "--delta", "4", "--kappa", "0.6", "--points", "400"],
        &["synth", "--family", "custom-pinney", "--r0-re", "0.3", "--r0-im", "1.1", "--r0p-re", "0.2", "--omega1", "1.5"],
        &["scan", "--family", "decaying", "--g-re", "0.5", "--scan-delta", "0.01:2:40", "--scan-g-im", "0,0.5"],
    ];
    for args in runs {
        let outputs: Vec<Vec<u8>> = (0..2)
            .map(|k| {
                let path = dir.path().join(format!("run{k}.csv"));
                let mut full = args.to_vec();
                full.extend(["--out", path.to_str().unwrap()]);
                assert_eq!(code(&ermakov(&full)), 0, "{args:?}");
                fs::read(&path).unwrap()
            })
            .collect();
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "{args:?}");
    }
}

#[test]
fn trajectory_rows_are_consistent() {
    let cases: [&[&str]; 5] = [
        &["--family", "circular", "--g-re", "1.7", "--g-im", "0.4", "--delta", "-0.6", "--Delta", "2"],
        &["--family", "decaying", "--g-re", "0.5", "--delta", "0.01"],
        &["--family", "oscillating", "--g-re", "12.649110640673518", "--delta", "6", "--kappa", "2.5"],
        &["--family", "custom-pinney", "--g-re", "1", "--delta", "0", "--kappa", "0.5"],
        &["--family", "custom-pinney", "--r0-re", "0.7", "--r0-im", "-1.2", "--r0p-im", "1.5"],
    ];
    for case in cases {
        let args = [&["evolve", "--points", "300"][..], case].concat();
        let (h, rows) = parse_csv(&stdout(&ermakov(&args)));
        assert_eq!(rows.len(), 300);
        let pp = column(&h, &rows, "pop_p");
        let pq = column(&h, &rows, "pop_q");
        let inv = column(&h, &rows, "inversion");
        let defect = column(&h, &rows, "unitarity_defect");
        let abs_r = column(&h, &rows, "abs_r");
        let (re, im) = (column(&h, &rows, "re_r"), column(&h, &rows, "im_r"));
        for k in 0..rows.len() {
            assert!((pp[k] + pq[k] - 1.0).abs() < 1e-10, "{case:?} row {k}");
            assert_eq!(inv[k], pp[k] - pq[k], "{case:?} row {k}");
            assert!(defect[k] < 1e-10, "{case:?} row {k}");
            assert!((abs_r[k] - re[k].hypot(im[k])).abs() <= 1e-15 * abs_r[k].max(1.0));
        }
    }
}

#[test]
fn alpha_fault_fails_verification() {
    for family in [
        &["--family", "circular", "--g-re", SQRT5, "--delta", "4"][..],
        &["--family", "decaying", "--g-re", "0.5", "--delta", "1"],
        &["--family", "oscillating", "--g-re", SQRT5, "--delta", "4", "--kappa", "0.6"],
    ] {
        let args = [&["verify", "--points", "100", "--Delta", "1"][..], family].concat();
        let clean = ermakov(&args);
        assert_eq!(code(&clean), 0, "{}", String::from_utf8_lossy(&clean.stderr));
        let faulty = ermakov(&[&args[..], &["--inject-alpha-fault", "1.01"]].concat());
        assert_eq!(code(&faulty), 1);
        let report: serde_json::Value = serde_json::from_slice(&faulty.stdout).unwrap();
        assert_eq!(report["report"]["pass"], false);
        assert!(report["report"]["max_propagator_error"].as_f64().unwrap() > 1e-3);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"family": "oscillating", "g_re": 2.23606797749979, "delta": 3.0, "omega1": 5.0,
            "level_splitting": 1.0, "points": 64, "outputs": ["field", "inversion"]}"#,
    )
    .unwrap();
    let from_file = stdout(&ermakov(&["evolve", "--config", config.to_str().unwrap(), "--delta", "4", "--kappa", "0.6"]));
    let from_flags = stdout(&ermakov(&[
        "evolve", "--family", "oscillating", "--g-re", SQRT5, "--delta", "4", "--kappa", "0.6", "--Delta", "1",
        "--points", "64", "--outputs", "field,inversion",
    ]));
    assert_eq!(from_file, from_flags);
    assert!(from_file.starts_with("t,re_r,im_r,abs_r,re_v,im_v,inversion\n"));
}

#[test]
fn verify_output_writes_report_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let status = ermakov(&[
        "synth", "--family", "decaying", "--g-re", "0.5", "--delta", "2", "--points", "50", "--outputs",
        "field,factorization,verify", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&status), 0, "{}", String::from_utf8_lossy(&status.stderr));
    let report_path = Path::new(&format!("{}.report.json", out.display())).to_owned();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(report["report"]["pass"], true);
    assert_eq!(report["report"]["grid"].as_array().unwrap().len(), 50);
    let (h, rows) = parse_csv(&fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 50);
    assert!(h.contains(&"re_delta_f".to_owned()));
}

#[test]
fn shipped_configs_run() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = ermakov(&["verify", "--config", path.to_str().unwrap(), "--points", "100"]);
        assert_eq!(code(&out), 0, "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        seen += 1;
    }
    assert!(seen >= 3);
}
