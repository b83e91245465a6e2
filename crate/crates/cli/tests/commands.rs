//! The `acida` binary end to end: generation, training, evaluation, reports.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use acida::domain::{DatasetManifest, Scenario, SplitTag};
use acida::harness::{MetricsReport, DET_SVG, RAW_CSV, REPORT_JSON, REPORT_TEXT};
use acida::synth::SyntheticBenchmark;

fn acida(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acida"))
        .args(args)
        .env_remove(acida_cli::CACHE_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = acida(args);
    assert!(
        out.status.success(),
        "acida {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_report(dir: &Path) -> MetricsReport {
    serde_json::from_str(&fs::read_to_string(dir.join(REPORT_JSON)).unwrap()).unwrap()
}

#[test]
fn gen_synthetic_writes_three_manifests_and_a_store() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["gen-synthetic", "--out", s(dir.path())]);
    for f in [
        SyntheticBenchmark::TRAIN_FILE,
        SyntheticBenchmark::VALIDATION_FILE,
        SyntheticBenchmark::TEST_FILE,
        SyntheticBenchmark::SUMMARY_FILE,
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    assert!(dir.path().join(SyntheticBenchmark::CACHE_DIR).is_dir());
    assert!(stdout.contains("subject-disjoint splits: true"), "{stdout}");
}

#[test]
fn gen_synthetic_is_byte_identical_for_a_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(&["gen-synthetic", "--out", s(d.path()), "--seed", "7", "--identities", "40"]);
    }
    let files = |d: &Path| {
        let mut v: Vec<_> = walk(d).into_iter().map(|p| p.strip_prefix(d).unwrap().to_path_buf()).collect();
        v.sort();
        v
    };
    let names = files(a.path());
    assert_eq!(names, files(b.path()));
    assert!(names.len() >= 6);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }

    // A rerun into the same directory overwrites rather than accumulates.
    ok(&["gen-synthetic", "--out", s(a.path()), "--seed", "8", "--identities", "40"]);
    ok(&["gen-synthetic", "--out", s(b.path()), "--seed", "8", "--identities", "40"]);
    let fresh = tempfile::tempdir().unwrap();
    ok(&["gen-synthetic", "--out", s(fresh.path()), "--seed", "8", "--identities", "40"]);
    let store = Path::new(SyntheticBenchmark::CACHE_DIR);
    for f in walk(&fresh.path().join(store)) {
        let rel = f.strip_prefix(fresh.path()).unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(a.path().join(rel)).unwrap(), "{rel:?}");
    }
}

fn walk(d: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(d).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn single_alpha_flag_restricts_every_morph() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-synthetic", "--out", s(dir.path()), "--alpha", "0.3", "--identities", "30"]);
    let mut morphs = 0;
    for (f, tag) in [
        (SyntheticBenchmark::TRAIN_FILE, SplitTag::Train),
        (SyntheticBenchmark::VALIDATION_FILE, SplitTag::Validation),
        (SyntheticBenchmark::TEST_FILE, SplitTag::Test),
    ] {
        let m = DatasetManifest::load(&dir.path().join(f), tag).unwrap();
        for p in m.entries.iter().filter(|p| p.label.is_morph()) {
            morphs += 1;
            assert_eq!(p.morph_meta.as_ref().unwrap().alpha, 0.3);
        }
    }
    assert!(morphs > 0);
}

#[test]
fn bad_synthetic_settings_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = acida(&["gen-synthetic", "--out", s(dir.path()), "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[fuson]\nmode = \"weighted\"\n").unwrap();
    let out = acida(&["train", "--config", s(&cfg), "--train", "x.csv", "--val", "y.csv", "--bundle", "b"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fuson"), "{err}");
}

#[test]
fn missing_bundle_is_a_data_error_and_future_bundle_a_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = acida(&["evaluate", "--bundle", s(&dir.path().join("nope")), "--test", "t.csv", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(dir.path().join("manifest.json"), "{\"version\": 99}").unwrap();
    let out = acida(&["evaluate", "--bundle", s(dir.path()), "--test", "t.csv", "--out", "o"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("99"));
}

/// Generates, trains and evaluates once; the flag variations reuse the bundle.
#[test]
fn train_evaluate_report_and_plot() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    let bundle = root.path().join("bundle");
    ok(&["gen-synthetic", "--out", s(&data), "--seed", "3", "--identities", "60"]);
    let store = data.join(SyntheticBenchmark::CACHE_DIR);
    let file = |f: &str| data.join(f);
    let train_out = ok(&[
        "train",
        "--train",
        s(&file(SyntheticBenchmark::TRAIN_FILE)),
        "--val",
        s(&file(SyntheticBenchmark::VALIDATION_FILE)),
        "--store",
        s(&store),
        "--bundle",
        s(&bundle),
        "--seed",
        "3",
        "--jobs",
        "1",
    ]);
    assert!(train_out.contains("bundle written"), "{train_out}");
    assert!(bundle.join("manifest.json").is_file());

    let test = file(SyntheticBenchmark::TEST_FILE);
    let eval = |out: &Path, extra: &[&str]| {
        let mut args = vec!["evaluate", "--bundle", s(&bundle), "--test", s(&test), "--out", s(out), "--jobs", "1"];
        args.extend_from_slice(extra);
        ok(&args)
    };

    // Default run: all outputs, all three scenarios, ten bins.
    let full = root.path().join("full");
    let text = eval(&full, &[]);
    for f in [REPORT_JSON, REPORT_TEXT, RAW_CSV, DET_SVG] {
        assert!(full.join(f).is_file(), "{f} missing");
    }
    let report = read_report(&full);
    assert_eq!(report.scenarios.len(), 3);
    assert_eq!(report.similarity.bins.len(), 10);
    let both = report.summary(Scenario::Both).unwrap();
    assert!(both.eer <= 0.2, "Both EER {}", both.eer);
    assert!(text.contains("both"), "{text}");

    // Scenario filter.
    let crim = root.path().join("criminal");
    eval(&crim, &["--scenario", "criminal"]);
    let r = read_report(&crim);
    assert_eq!(r.scenarios.len(), 1);
    assert_eq!(r.scenarios[0].scenario, Scenario::Criminal);
    let raw = fs::read_to_string(full.join(RAW_CSV)).unwrap();
    let expected_pairs = raw.lines().skip(1).filter(|l| !l.contains(",accomplice,")).count();
    assert_eq!(r.n_pairs, expected_pairs);

    // Bin count.
    let binned = root.path().join("bins");
    eval(&binned, &["--bins", "8"]);
    assert_eq!(read_report(&binned).similarity.bins.len(), 8);

    // Ablation: id_only scores are exactly the identity scores.
    let id_only = root.path().join("id_only");
    eval(&id_only, &["--ablation", "id_only"]);
    let r = read_report(&id_only);
    assert_eq!(r.ablation, acida::harness::Ablation::IdOnly);
    let rows = acida::harness::read_raw(&id_only.join(RAW_CSV)).unwrap();
    let recomputed = acida::harness::variant_scores(&rows, acida::harness::Ablation::IdOnly, r.fusion).unwrap();
    assert!(rows.iter().zip(&recomputed).all(|(row, s)| row.s_id == *s));

    // The raw CSV reproduces the report metrics exactly.
    let again = root.path().join("again");
    ok(&["report", "--raw", s(&full.join(RAW_CSV)), "--out", s(&again), "--bundle", s(&bundle)]);
    let r2 = read_report(&again);
    assert_eq!(r2.scenarios, report.scenarios);
    assert_eq!(r2.similarity, report.similarity);

    let svg = root.path().join("plot.svg");
    ok(&["plot-det", "--report", s(&full.join(REPORT_JSON)), "--out", s(&svg)]);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    // Evaluation is deterministic.
    let twice = root.path().join("twice");
    eval(&twice, &[]);
    assert_eq!(fs::read(full.join(RAW_CSV)).unwrap(), fs::read(twice.join(RAW_CSV)).unwrap());

    // A manifest naming a vector that is not in the store is refused.
    let bad = root.path().join("bad.csv");
    let mut text = fs::read_to_string(&test).unwrap();
    let first_ref = text.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    text = text.replacen(&first_ref, "emb:missing-vector", 1);
    fs::write(&bad, text).unwrap();
    let out = acida(&["evaluate", "--bundle", s(&bundle), "--test", s(&bad), "--out", s(&root.path().join("x"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing-vector"));
}
