use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cohort::modelfile::{LoadOptions, Model};

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn progressive() -> PathBuf {
    models_dir().join("progressive4.model")
}

fn cohortmn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohortmn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV file, split on commas, comments and header dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn edited_model(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(progressive()).unwrap();
    assert!(text.contains(from));
    let path = dir.join(name);
    fs::write(&path, text.replace(from, to)).unwrap();
    path
}

#[test]
fn moments_first_cycle_of_reference_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let run = cohortmn(&["moments", "--model", s(&progressive()), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));

    let rows = rows(&out);
    assert_eq!(rows.len(), 51 * 4);
    let s1 = rows.iter().find(|r| r[0] == "1" && r[1] == "S1").unwrap();
    // 10000 * 0.71 and 10000 * 0.71 * 0.29.
    assert!((s1[2].parse::<f64>().unwrap() - 7100.0).abs() < 1e-9);
    assert!((s1[3].parse::<f64>().unwrap() - 2059.0).abs() < 1e-9);

    let cov = dir.path().join("m_cov.csv");
    let cov_rows = self::rows(&cov);
    assert_eq!(cov_rows.len(), 51 * 16);
    let c12 = cov_rows
        .iter()
        .find(|r| r[0] == "1" && r[1] == "S1" && r[2] == "S2")
        .unwrap();
    assert!((c12[3].parse::<f64>().unwrap() + 10000.0 * 0.71 * 0.10).abs() < 1e-9);
}

#[test]
fn moments_identity_model_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    assert_eq!(
        code(&cohortmn(&[
            "moments",
            "--model",
            s(&models_dir().join("identity.model")),
            "--out",
            s(&out)
        ])),
        0
    );
    let rows = rows(&out);
    for r in &rows {
        let expected = match r[1].as_str() {
            "A" => 40.0,
            "B" => 25.0,
            _ => 35.0,
        };
        assert_eq!(r[2].parse::<f64>().unwrap(), expected);
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn moments_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    cohortmn(&["moments", "--model", s(&progressive()), "--out", s(&a)]);
    cohortmn(&["moments", "--model", s(&progressive()), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a_cov.csv")).unwrap(),
        fs::read(dir.path().join("b_cov.csv")).unwrap()
    );
}

#[test]
fn out_of_range_probability_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = edited_model(dir.path(), "bad.model", "S1 -> S3: 0.05", "S1 -> S3: 1.2");
    let out = dir.path().join("m.csv");
    let run = cohortmn(&["moments", "--model", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&run), 3);
    let msg = String::from_utf8_lossy(&run.stderr);
    assert!(msg.contains("S1 -> S3") && msg.contains("line 10"), "{msg}");
    assert!(!out.exists() && !dir.path().join("m_cov.csv").exists());
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = edited_model(dir.path(), "bad.model", "S2 -> S3: 0.07", "S2 => S3 0.07");
    let run = cohortmn(&[
        "moments",
        "--model",
        s(&bad),
        "--out",
        s(&dir.path().join("m.csv")),
    ]);
    assert_eq!(code(&run), 2, "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn missing_model_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let run = cohortmn(&[
        "moments",
        "--model",
        s(&dir.path().join("nope.model")),
        "--out",
        s(&dir.path().join("m.csv")),
    ]);
    assert_eq!(code(&run), 1);
}

#[test]
fn argument_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let run = cohortmn(&[
        "simulate",
        "--model",
        s(&progressive()),
        "--replications",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 4);
    assert!(!out.exists());
    assert_eq!(
        code(&cohortmn(&[
            "simulate",
            "--model",
            s(&progressive()),
            "--out",
            s(&out)
        ])),
        4
    );
    assert_eq!(code(&cohortmn(&["frobnicate"])), 4);
    let band = cohortmn(&[
        "compare",
        "--model",
        s(&progressive()),
        "--replications",
        "10",
        "--report",
        s(&dir.path().join("r.csv")),
        "--ratio-band",
        "1.2,0.9",
    ]);
    assert_eq!(code(&band), 4);
    assert_eq!(code(&cohortmn(&["--help"])), 0);
    assert_eq!(code(&cohortmn(&["--version"])), 0);
}

#[test]
fn simulate_is_reproducible_and_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let args = |out: &Path| {
        vec![
            "simulate".to_owned(),
            "--model".into(),
            s(&progressive()).into(),
            "--replications".into(),
            "200".into(),
            "--seed".into(),
            "99".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let run = |out: &Path| {
        let a = args(out);
        code(&cohortmn(&a.iter().map(String::as_str).collect::<Vec<_>>()))
    };
    assert_eq!(run(&a), 0);
    assert_eq!(run(&b), 0);
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());

    let text = String::from_utf8(bytes).unwrap();
    assert!(
        text.contains("# seed=99\n")
            && text.contains("# rng=")
            && text.contains("# generator=cohortmn ")
    );
    assert!(!text.contains("worker"));
    let rows = rows(&a);
    assert!(rows.iter().all(|r| r[4] == "200" && r[5] == "99"));

    // The absorbing state only fills up.
    let s4: Vec<f64> = rows
        .iter()
        .filter(|r| r[1] == "S4")
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(s4.len(), 51);
    assert!(s4.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn seed_defaults_to_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let m = progressive();
    cohortmn(&[
        "simulate",
        "--model",
        s(&m),
        "--replications",
        "5",
        "--out",
        s(&a),
    ]);
    cohortmn(&[
        "simulate",
        "--model",
        s(&m),
        "--replications",
        "5",
        "--seed",
        "12345",
        "--out",
        s(&b),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn compare_reference_model_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.csv");
    let run = cohortmn(&[
        "compare",
        "--model",
        s(&progressive()),
        "--replications",
        "1000",
        "--report",
        s(&report),
    ]);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(code(&run), 0, "{stdout}");
    assert!(stdout.contains("result: PASS"));
    let summary = fs::read_to_string(dir.path().join("r.summary.txt")).unwrap();
    assert_eq!(summary, stdout);
    assert_eq!(rows(&report).len(), 51 * 4);
}

#[test]
fn compare_detects_perturbed_analytic_model() {
    let dir = tempfile::tempdir().unwrap();
    let analytic = edited_model(dir.path(), "pert.model", "S1 -> S2: 0.1", "S1 -> S2: 0.15");
    let run = cohortmn(&[
        "compare",
        "--model",
        s(&progressive()),
        "--analytic-model",
        s(&analytic),
        "--replications",
        "1000",
        "--report",
        s(&dir.path().join("r.csv")),
    ]);
    assert_eq!(code(&run), 5);
    assert!(String::from_utf8_lossy(&run.stdout).contains("result: FAIL"));
}

#[test]
fn compare_identity_model_with_two_replications() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.csv");
    let run = cohortmn(&[
        "compare",
        "--model",
        s(&models_dir().join("identity.model")),
        "--replications",
        "2",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&run), 0);
    let rows = rows(&report);
    assert_eq!(rows.len(), 11 * 3);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn posterior_from_counts_with_default_prior() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let run = cohortmn(&[
        "posterior",
        "--counts",
        s(&models_dir().join("counts_example.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0);
    assert!(String::from_utf8_lossy(&run.stdout).contains("prior (uniform)"));
    let alphas: Vec<f64> = rows(&out)
        .iter()
        .filter(|r| r[0] == "S1")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert_eq!(alphas, [8.0, 2.0, 1.0, 3.0]);
}

#[test]
fn posterior_of_empty_counts_is_prior() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("c.csv");
    fs::write(&counts, "").unwrap();
    let prior = dir.path().join("prior.csv");
    fs::write(&prior, "from,A,B\nA,2,0.5\nB,1,3\n").unwrap();
    let out = dir.path().join("p.csv");
    let run = cohortmn(&[
        "posterior",
        "--counts",
        s(&counts),
        "--prior",
        s(&prior),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for r in rows(&out) {
        assert_eq!(r[2], r[4]);
        assert_eq!(r[3], "0");
    }
}

#[test]
fn posterior_dimension_mismatch_exits_six() {
    let dir = tempfile::tempdir().unwrap();
    let prior = dir.path().join("prior.csv");
    fs::write(&prior, "from,A,B\nA,1,1\nB,1,1\n").unwrap();
    let run = cohortmn(&[
        "posterior",
        "--counts",
        s(&models_dir().join("counts_example.csv")),
        "--prior",
        s(&prior),
        "--out",
        s(&dir.path().join("p.csv")),
    ]);
    assert_eq!(code(&run), 6);

    let counts = dir.path().join("c.csv");
    fs::write(&counts, "from,to,count\nA,B,3\n").unwrap();
    let unlabeled = cohortmn(&[
        "posterior",
        "--counts",
        s(&counts),
        "--out",
        s(&dir.path().join("p.csv")),
    ]);
    assert_eq!(code(&unlabeled), 4);
    let labeled = cohortmn(&[
        "posterior",
        "--counts",
        s(&counts),
        "--states",
        "A,B",
        "--out",
        s(&dir.path().join("p.csv")),
    ]);
    assert_eq!(code(&labeled), 0);
}

#[test]
fn posterior_from_stored_paths() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("small.model");
    // 3400 people for one cycle: 10^4 person-cycles over the three live states.
    fs::write(
        &model,
        fs::read_to_string(progressive())
            .unwrap()
            .replace("initial: S1=10000", "initial: S1=3400 S2=3300 S3=3300")
            .replace("n0: 10000\n", "")
            .replace("horizon: 50", "horizon: 1"),
    )
    .unwrap();
    let paths = dir.path().join("paths.csv");
    let run = cohortmn(&[
        "simulate",
        "--model",
        s(&model),
        "--replications",
        "2",
        "--seed",
        "4",
        "--out",
        s(&dir.path().join("s.csv")),
        "--store-paths",
        s(&paths),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));

    let out = dir.path().join("p.csv");
    assert_eq!(
        code(&cohortmn(&[
            "posterior",
            "--paths",
            s(&paths),
            "--out",
            s(&out)
        ])),
        0
    );
    let row1: Vec<f64> = rows(&out)
        .iter()
        .filter(|r| r[0] == "S1")
        .map(|r| r[5].parse().unwrap())
        .collect();
    for (got, want) in row1.iter().zip([0.71, 0.10, 0.05, 0.14]) {
        assert!((got - want).abs() < 0.02, "{row1:?}");
    }
}

#[test]
fn model_file_round_trips() {
    for name in ["progressive4.model", "identity.model", "time_varying.model"] {
        let text = fs::read_to_string(models_dir().join(name)).unwrap();
        let (model, _) = Model::parse(&text, LoadOptions::default()).unwrap();
        let written = model.to_text();
        let (again, _) = Model::parse(&written, LoadOptions::default()).unwrap();
        assert_eq!(model, again, "{name}");
        assert_eq!(written, again.to_text());
    }
}
