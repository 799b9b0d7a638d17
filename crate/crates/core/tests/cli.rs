use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bodyid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bodyid"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> Output {
    let out = bodyid(args);
    assert_eq!(
        code(&out),
        0,
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const QUICK: &str = r#"{"fit": {"max_iters": 12}, "train": {"epochs": 30}}"#;

/// synth → fit → embed-train → enroll → eval under `root`.
fn run_chain(root: &Path, seed: &str, extra_enroll: &[&str]) {
    let config = root.join("config.json");
    fs::write(&config, QUICK).unwrap();
    let cfg = p(&config);
    let data = root.join("data");
    ok(&["synth", "--subjects", "3", "--train-subjects", "3", "--frames", "4", "--seed", seed, "--out-dir", p(&data)]);
    let fits = root.join("fits");
    ok(&["fit", "--dataset", p(&data), "--seq-len", "2", "--config", cfg, "--seed", seed, "--out-dir", p(&fits)]);
    let emb = root.join("emb");
    ok(&[
        "embed-train",
        "--fits",
        p(&fits.join("fits.ndjson")),
        "--config",
        cfg,
        "--seed",
        seed,
        "--out-dir",
        p(&emb),
    ]);
    let enr = root.join("enroll");
    let features = emb.join("features.ndjson");
    let mut args = vec!["enroll", "--features", p(&features), "--out-dir", p(&enr)];
    args.extend_from_slice(extra_enroll);
    ok(&args);
    ok(&["eval", "--protocol", p(&enr.join("protocol.json")), "--out-dir", p(&root.join("eval"))]);
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["synth", "--subjects", "2", "--train-subjects", "0", "--frames", "2", "--seed", "1", "--out-dir", p(&a)]);
    ok(&["synth", "--subjects", "2", "--train-subjects", "0", "--frames", "2", "--seed", "1", "--out-dir", p(&b)]);
    ok(&["synth", "--subjects", "2", "--train-subjects", "0", "--frames", "2", "--seed", "2", "--out-dir", p(&c)]);
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "manifest.json"), read(&b, "manifest.json"));
    assert_eq!(read(&a, "sequences/s0000-c0.ndjson"), read(&b, "sequences/s0000-c0.ndjson"));
    assert_ne!(read(&a, "manifest.json"), read(&c, "manifest.json"));
    let manifest = String::from_utf8(read(&a, "manifest.json")).unwrap();
    assert!(manifest.contains("\"schema\": \"synth/v1\""));
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    assert_eq!(code(&bodyid(&["synth", "--subjects", "3"])), 2);
    assert_eq!(code(&bodyid(&["synth", "--subjects", "0", "--out-dir", out])), 2);
    assert_eq!(code(&bodyid(&["synth", "--bogus", "--out-dir", out])), 2);
    assert_eq!(code(&bodyid(&["frobnicate"])), 2);
    assert_eq!(code(&bodyid(&["--threads", "0", "synth", "--out-dir", out])), 2);

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"fit": {"max_iterations": 3}}"#).unwrap();
    let res = bodyid(&["synth", "--config", p(&cfg), "--out-dir", out]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("max_iterations"));
    assert_eq!(code(&bodyid(&["--help"])), 0);
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(code(&bodyid(&["fit", "--dataset", p(&missing), "--out-dir", p(dir.path())])), 3);
    assert_eq!(code(&bodyid(&["report", "--report", p(&missing), "--out-dir", p(dir.path())])), 3);
}

#[test]
fn full_chain_is_deterministic_and_emits_all_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_chain(a.path(), "4", &["--agg", "best", "--yaw-bins", "4"]);
    run_chain(b.path(), "4", &["--agg", "best", "--yaw-bins", "4"]);
    for f in [
        "fits/fits.ndjson",
        "fits/losses/s0003-c0-0-2.csv",
        "emb/head.json",
        "emb/features.ndjson",
        "emb/losses/embed.csv",
        "enroll/protocol.json",
        "enroll/gallery/s0003.json",
        "enroll/probes/s0003-f1.json",
        "eval/report.json",
        "eval/cmc.csv",
        "eval/roc.csv",
        "eval/scores.csv",
    ] {
        let x = fs::read(a.path().join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
    let fits = fs::read_to_string(a.path().join("fits/fits.ndjson")).unwrap();
    // 6 subjects x 2 sequences x 2 windows of 2 frames
    assert_eq!(fits.lines().count(), 24);
    assert!(fits.lines().next().unwrap().contains("\"beta_mean\""));
    let loss = fs::read_to_string(a.path().join("emb/losses/embed.csv")).unwrap();
    assert!(loss.starts_with("iter,total,chamfer,keypoint,consistency,arcmargin\n"));
    let cmc = fs::read_to_string(a.path().join("eval/cmc.csv")).unwrap();
    let ranks: Vec<&str> = cmc.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ranks, vec!["1", "5", "10", "20"]);
    let report = fs::read_to_string(a.path().join("eval/report.json")).unwrap();
    assert!(report.contains("\"far\": 0.01") && report.contains("\"far\": 0.001"));

    let bundle = a.path().join("bundle");
    let out = ok(&["report", "--report", p(&a.path().join("eval/report.json")), "--out-dir", p(&bundle)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("rank1"));
    for f in ["report.json", "cmc.csv", "roc.csv"] {
        assert_eq!(fs::read(bundle.join(f)).unwrap(), fs::read(a.path().join("eval").join(f)).unwrap());
    }
}

#[test]
fn windows_follow_the_sequence_length_rule() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--subjects", "2", "--train-subjects", "0", "--frames", "12", "--out-dir", p(&data)]);
    let fits = dir.path().join("fits");
    ok(&["fit", "--dataset", p(&data), "--seq-len", "5", "--max-iters", "3", "--out-dir", p(&fits)]);
    let text = fs::read_to_string(fits.join("fits.ndjson")).unwrap();
    let windows: Vec<&str> = text
        .lines()
        .map(|l| {
            let i = l.find("\"window\":").unwrap();
            &l[i + 9..i + 9 + l[i + 9..].find(']').unwrap() + 1]
        })
        .collect();
    assert_eq!(windows, ["[0,5]", "[5,12]"].repeat(4));
}

#[test]
fn corrupt_frame_lines_are_skipped_with_a_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--subjects", "2", "--train-subjects", "0", "--frames", "2", "--out-dir", p(&data)]);
    let seq = data.join("sequences/s0000-c0.ndjson");
    let mut text = fs::read_to_string(&seq).unwrap();
    text.push_str("{\"frame\": oops}\n");
    fs::write(&seq, text).unwrap();
    let out = ok(&["fit", "--dataset", p(&data), "--max-iters", "3", "--out-dir", p(&dir.path().join("fits"))]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 corrupt frame lines skipped"));
}

#[test]
fn match_scores_a_set_against_itself_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    run_chain(dir.path(), "6", &[]);
    let probes = dir.path().join("enroll/gallery");
    let out = dir.path().join("match");
    ok(&["match", "--probe", p(&probes), "--gallery", p(&probes), "--out-dir", p(&out)]);
    let csv = fs::read_to_string(out.join("scores.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], vec!["probe", "s0003", "s0004", "s0005"]);
    for (i, row) in rows.iter().enumerate().skip(1) {
        assert_eq!(row[i].parse::<f64>().unwrap(), 0.0, "row {i}: {row:?}");
    }
}

#[test]
fn mixed_bin_configurations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    run_chain(dir.path(), "7", &["--yaw-bins", "8"]);
    let feats = dir.path().join("emb/features.ndjson");
    let one = dir.path().join("one");
    ok(&["enroll", "--features", p(&feats), "--yaw-bins", "1", "--out-dir", p(&one)]);
    let res = bodyid(&[
        "match",
        "--probe",
        p(&dir.path().join("enroll/probes")),
        "--gallery",
        p(&one.join("gallery")),
        "--out-dir",
        p(&dir.path().join("m")),
    ]);
    assert_eq!(code(&res), 2);
    // a protocol whose gallery file was swapped for a different binning
    fs::copy(one.join("gallery/s0003.json"), dir.path().join("enroll/gallery/s0003.json")).unwrap();
    let res = bodyid(&[
        "eval",
        "--protocol",
        p(&dir.path().join("enroll/protocol.json")),
        "--out-dir",
        p(&dir.path().join("e2")),
    ]);
    assert_eq!(code(&res), 2);
}
