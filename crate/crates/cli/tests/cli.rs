use std::path::Path;
use std::process::{Command, Output};

use cbpois_cli::io::{format_pgm, parse_counts, parse_pgm, parse_samples};
use proptest::prelude::*;

fn cbpois(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbpois"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cbpois(dir, args);
    assert!(
        out.status.success(),
        "cbpois {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn all_zero_counts_give_zero_error_under_identity() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.txt"), "0\n0\n0\n0\n").unwrap();
    for method in ["cb", "ue"] {
        ok(
            dir.path(),
            &[
                "estimate",
                "--input",
                "y.txt",
                "--method",
                method,
                "--loss",
                "squared,deviance",
                "--out",
                "e.csv",
            ],
        );
        let (h, rows) = read_csv(&dir.path().join("e.csv"));
        assert_eq!(rows.len(), 2);
        for r in &rows {
            let v: f64 = r[col(&h, "estimate")].parse().unwrap();
            // deviance of a zero count against the padded zero fit is 2c per coordinate
            assert!(v.abs() < 1e-7, "{method}: {v}");
        }
    }
}

#[test]
fn single_count_matches_hand_computed_expectation() {
    // y = 1, identity fit, squared loss: ω ~ Bern(p); the replicate is 2 when
    // ω = 0 and 0 otherwise, so its mean is 2(1 − p) = 1.5 at p = 1/4
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.txt"), "1\n").unwrap();
    ok(
        dir.path(),
        &[
            "estimate", "--input", "y.txt", "--p", "0.25", "--B", "100000", "--seed", "11",
            "--out", "e.csv",
        ],
    );
    let (h, rows) = read_csv(&dir.path().join("e.csv"));
    let est: f64 = rows[0][col(&h, "estimate")].parse().unwrap();
    let se: f64 = rows[0][col(&h, "se")].parse().unwrap();
    assert!((est - 1.5).abs() <= 4.0 * se, "{est} ± {se}");
    assert!(se < 0.01);
}

#[test]
fn ue_sampled_with_full_subsample_equals_ue() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.txt"), "3\n0\n1\n7\n2\n").unwrap();
    let base = [
        "estimate",
        "--input",
        "y.txt",
        "--algorithm",
        "eb",
        "--loss",
        "deviance",
    ];
    ok(
        dir.path(),
        &[&base[..], &["--method", "ue", "--out", "a.csv"]].concat(),
    );
    ok(
        dir.path(),
        &[
            &base[..],
            &["--method", "ue-ss", "--m", "5", "--out", "b.csv"],
        ]
        .concat(),
    );
    let (h, a) = read_csv(&dir.path().join("a.csv"));
    let (_, b) = read_csv(&dir.path().join("b.csv"));
    let (va, vb): (f64, f64) = (
        a[0][col(&h, "estimate")].parse().unwrap(),
        b[0][col(&h, "estimate")].parse().unwrap(),
    );
    assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0), "{va} vs {vb}");
}

#[test]
fn malformed_counts_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.txt"), "1\n2\nthree\n").unwrap();
    let out = cbpois(dir.path(), &["estimate", "--input", "y.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invalid_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.txt"), "1\n").unwrap();
    for bad in [
        ["--p", "1.5"],
        ["--p", "0"],
        ["--B", "0"],
        ["--pad-c", "-1"],
    ] {
        let out = cbpois(
            dir.path(),
            &[&["estimate", "--input", "y.txt"][..], &bad[..]].concat(),
        );
        assert_eq!(out.status.code(), Some(2), "{bad:?}");
    }
    let out = cbpois(dir.path(), &["estimate", "--input", "missing.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"design": {"constant": {"n": 5, "mu": "x"}}, "algorithm": "identity",
            "losses": ["squared"], "p": [0.1], "methods": ["cb"], "repetitions": 1, "seed": 0}"#,
    )
    .unwrap();
    let out = cbpois(dir.path(), &["simulate", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("design.constant.mu"), "{err}");
}

#[test]
fn simulate_with_zero_repetitions_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"design": {"constant": {"n": 5, "mu": 1.0}}, "algorithm": "identity",
            "losses": ["squared"], "p": [0.1], "methods": ["cb", "ue"], "repetitions": 0,
            "truth_draws": 10, "seed": 0}"#,
    )
    .unwrap();
    let stdout = ok(dir.path(), &["simulate", "--config", "c.json"]);
    assert_eq!(
        stdout,
        "repetition,method,p,loss,estimate,se,truth,truth_se,err,err_se,err_p,err_p_se\n"
    );
}

#[test]
fn simulate_rows_are_per_observation() {
    let dir = tempfile::tempdir().unwrap();
    // identity on μ ≡ 2 under squared loss: Err = 2nμ, so 4 per observation
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"design": {"constant": {"n": 50, "mu": 2.0}}, "algorithm": "identity",
            "losses": ["squared"], "methods": ["ue"], "repetitions": 1,
            "truth_draws": 4000, "seed": 2}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &["simulate", "--config", "c.json", "--out", "s.csv"],
    );
    let (h, rows) = read_csv(&dir.path().join("s.csv"));
    let truth: f64 = rows[0][col(&h, "truth")].parse().unwrap();
    let se: f64 = rows[0][col(&h, "truth_se")].parse().unwrap();
    assert!((truth - 4.0).abs() <= 4.0 * se, "{truth} ± {se}");
}

#[test]
fn tune_marks_one_argmin_per_loss() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("y.txt"), "0\n1\n9\n0\n2\n11\n0\n1\n").unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "tune",
            "--input",
            "y.txt",
            "--family",
            "linear-shrinkage",
            "--grid",
            "0.2,0.6,1",
            "--out",
            "t.csv",
        ],
    );
    assert_eq!(
        stdout.lines().filter(|l| l.starts_with("argmin")).count(),
        2
    );
    let (h, rows) = read_csv(&dir.path().join("t.csv"));
    assert_eq!(rows.len(), 6);
    let flags: usize = rows
        .iter()
        .map(|r| r[col(&h, "argmin")].parse::<usize>().unwrap())
        .sum();
    assert_eq!(flags, 2);
}

#[test]
fn denoise_without_penalty_returns_shifted_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("img.pgm"), "P2\n3 2\n9\n0 4 9\n1 0 2\n").unwrap();
    ok(
        dir.path(),
        &[
            "denoise", "--input", "img.pgm", "--tau", "0", "--rho", "0.01", "--out", "out.pgm",
        ],
    );
    let (h, rows) = read_csv(&dir.path().join("out.csv"));
    for r in rows {
        let count: f64 = r[col(&h, "count")].parse().unwrap();
        let value: f64 = r[col(&h, "value")].parse().unwrap();
        assert!((value - (count - 0.01).max(0.0)).abs() < 1e-12);
    }
    let pgm = std::fs::read_to_string(dir.path().join("out.pgm")).unwrap();
    assert_eq!(pgm, "P2\n3 2\n9\n0 4 9\n1 0 2\n");
}

#[test]
fn denoise_keeps_a_constant_image_constant() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("img.pgm"),
        "P2\n4 4\n5\n5 5 5 5\n5 5 5 5\n5 5 5 5\n5 5 5 5\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "denoise", "--input", "img.pgm", "--tau", "2", "--out", "out.pgm",
        ],
    );
    let (h, rows) = read_csv(&dir.path().join("out.csv"));
    let vals: Vec<f64> = rows
        .iter()
        .map(|r| r[col(&h, "value")].parse().unwrap())
        .collect();
    for v in &vals {
        assert!((v - 5.0).abs() < 1e-3, "{v}");
    }
}

#[test]
fn denoise_tuning_writes_sweep_with_truth() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "denoise",
            "--phantom",
            "10",
            "--tune",
            "--taus",
            "0.1,1",
            "--B",
            "4",
            "--truth-draws",
            "3",
            "--out",
            "d.pgm",
        ],
    );
    assert!(stdout.contains("argmin squared"));
    let (h, rows) = read_csv(&dir.path().join("d_sweep.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows
        .iter()
        .all(|r| r[col(&h, "truth")].parse::<f64>().is_ok()));
    assert!(dir.path().join("d.pgm").exists() && dir.path().join("d.csv").exists());
}

fn write_samples(dir: &Path) {
    let mut text = String::from("# two clumps\n");
    for k in 0..60 {
        let t = k as f64 / 60.0;
        let (x, y) = if k % 2 == 0 {
            (-1.0 + 0.5 * t, -1.0 + 0.3 * (7.0 * t).sin())
        } else {
            (1.0 + 0.8 * t, 0.5 * (5.0 * t).cos())
        };
        text.push_str(&format!("{x} {y}\n"));
    }
    std::fs::write(dir.join("s.txt"), text).unwrap();
}

#[test]
fn density_isotropic_matches_anisotropic_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    write_samples(dir.path());
    let common = [
        "density",
        "--input",
        "s.txt",
        "--bins",
        "10",
        "--knots",
        "5",
        "--lambdas",
        "0.1,10",
        "--B",
        "6",
        "--seed",
        "4",
    ];
    ok(dir.path(), &[&common[..], &["--out", "iso.csv"]].concat());
    ok(
        dir.path(),
        &[&common[..], &["--mode", "anisotropic", "--out", "an.csv"]].concat(),
    );
    let (hi, iso) = read_csv(&dir.path().join("iso_sweep.csv"));
    let (ha, an) = read_csv(&dir.path().join("an_sweep.csv"));
    assert_eq!(iso.len(), 4);
    assert_eq!(an.len(), 8);
    for r in &iso {
        let lam = &r[col(&hi, "lambda")];
        let loss = &r[col(&hi, "loss")];
        let diag = an
            .iter()
            .find(|a| {
                &a[col(&ha, "lambda1")] == lam
                    && &a[col(&ha, "lambda2")] == lam
                    && &a[col(&ha, "loss")] == loss
            })
            .unwrap();
        assert_eq!(r[col(&hi, "estimate")], diag[col(&ha, "estimate")]);
    }
}

#[test]
fn density_output_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    write_samples(dir.path());
    ok(
        dir.path(),
        &[
            "density",
            "--input",
            "s.txt",
            "--bins",
            "12",
            "--knots",
            "5",
            "--lambdas",
            "1",
            "--B",
            "3",
            "--out",
            "d.csv",
        ],
    );
    let (h, rows) = read_csv(&dir.path().join("d.csv"));
    let text = std::fs::read_to_string(dir.path().join("s.txt")).unwrap();
    let pts = parse_samples(&text).unwrap();
    let span = |d: usize| {
        let v: Vec<f64> = pts.iter().map(|p| p[d]).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    for loss in ["squared", "deviance"] {
        let total: f64 = rows
            .iter()
            .map(|r| {
                r[col(&h, &format!("density_{loss}"))]
                    .parse::<f64>()
                    .unwrap()
            })
            .sum();
        // bins cover at least the sample range, so the cell volume is at least span/bins
        let vol_lo = span(0) / 12.0 * span(1) / 12.0;
        assert!(
            total * vol_lo <= 1.0 + 1e-9 && total * vol_lo > 0.5,
            "{loss}: {total}"
        );
    }
}

#[test]
fn verify_suites_report_json_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["hudson", "limit", "thinning", "illdef", "bounds"] {
        let out = cbpois(dir.path(), &["verify", suite, "--seed", "1"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{suite}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["suite"], suite);
        assert_eq!(report["passed"], true);
        assert!(!report["checks"].as_array().unwrap().is_empty());
    }
    let out = cbpois(dir.path(), &["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

proptest! {
    #[test]
    fn counts_round_trip(values in proptest::collection::vec(0u64..1_000_000, 1..50)) {
        let text: String = values.iter().map(|v| format!("{v}\n\n")).collect();
        prop_assert_eq!(parse_counts(&text).unwrap(), values);
    }

    #[test]
    fn pgm_round_trip(w in 1usize..8, h in 1usize..8, seed in 0u64..1000) {
        let vals: Vec<f64> = (0..w * h).map(|k| ((k as u64 * 7919 + seed) % 300) as f64).collect();
        let img = parse_pgm(&format_pgm(w, h, &vals)).unwrap();
        prop_assert_eq!((img.width, img.height), (w, h));
        let back: Vec<f64> = img.counts.iter().map(|&c| c as f64).collect();
        prop_assert_eq!(back, vals);
    }

    #[test]
    fn samples_round_trip(points in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..30)) {
        let text: String = points.iter().map(|(a, b)| format!("{a} {b} # c\n")).collect();
        let parsed = parse_samples(&text).unwrap();
        let expect: Vec<Vec<f64>> = points.iter().map(|&(a, b)| vec![a, b]).collect();
        prop_assert_eq!(parsed, expect);
    }
}
