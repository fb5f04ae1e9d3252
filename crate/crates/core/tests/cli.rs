use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_clsec");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn clsec(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CLSEC_LM_ENDPOINT")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn correct(mode: &str) -> Output {
    clsec(&[
        "correct",
        "--input",
        path(&data("received.clsf")),
        "--corpus",
        path(&data("toy.txt")),
        "--vocab",
        path(&data("toy.vocab")),
        "--mode",
        mode,
    ])
}

#[test]
fn correct_fixture() {
    let out = correct("fused");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "the dog sat on the mat\nthe cat saw the dog\n");

    // Context alone picks the more frequent word for the corrupted "dog".
    let out = correct("semantic");
    assert_eq!(stdout(&out), "the cat sat on the mat\nthe cat saw the dog\n");
}

#[test]
fn frame_fixture_round_trip() {
    let out = clsec(&["frame", "decode", "--input", path(&data("received.clsf"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), fs::read_to_string(data("received.dump")).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let encoded = dir.path().join("out.clsf");
    let out = clsec(&["frame", "encode", "--input", path(&data("received.dump")), "--output", path(&encoded)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(encoded).unwrap(), fs::read(data("received.clsf")).unwrap());
}

#[test]
fn truncated_stream_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.clsf");
    let bytes = fs::read(data("received.clsf")).unwrap();
    fs::write(&bad, &bytes[..bytes.len() - 3]).unwrap();
    let out = clsec(&["correct", "--input", path(&bad), "--vocab", path(&data("toy.vocab")), "--mode", "llr"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(clsec(&[]).status.code(), Some(2));
    assert_eq!(clsec(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(clsec(&["simulate", "--mode", "psychic"]).status.code(), Some(2));
    // Missing required inputs.
    assert_eq!(clsec(&["simulate", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(
        clsec(&["correct", "--input", path(&data("received.clsf")), "--vocab", path(&data("toy.vocab")), "--model", "remote"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(clsec(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_exits_1() {
    let out = clsec(&["frame", "decode", "--input", "/nonexistent/x.clsf"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    let out_dir = dir.path().join("out");
    fs::write(
        &config,
        serde_json::json!({
            "corpus": data("toy.txt"),
            "vocab": data("toy.vocab"),
            "len": [3, 4],
            "mode": ["llr", "fused"],
            "snr_db": [2.0],
            "trials": 5,
            "seed": 9,
            "out": out_dir,
        })
        .to_string(),
    )
    .unwrap();
    // A flag overrides the file.
    let out = clsec(&["simulate", "--config", path(&config), "--trials", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trials.csv", "aggregate.csv", "fig3_prr_vs_len.csv", "fig4_mra_by_mode.csv", "report.txt"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let trials = fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 2 * 7);
    assert!(trials.starts_with(
        "mode,seq_len,snr_db,trial_idx,n_words,n_masks,n_resolved_correct,n_silent_errors,exact_match\n"
    ));
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("mode,seq_len,snr_db,trials,prr,prr_ci95,mra,mra_ci95,total_masks\n"));
    assert_eq!(agg.lines().count(), 5);

    fs::write(&config, r#"{"no_such_option": 1}"#).unwrap();
    assert_eq!(clsec(&["simulate", "--config", path(&config)]).status.code(), Some(2));
}

#[test]
fn ngram_save_and_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("toy.ngram");
    let out = clsec(&[
        "ngram",
        "--corpus",
        path(&data("toy.txt")),
        "--vocab",
        path(&data("toy.vocab")),
        "--out",
        path(&model),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = clsec(&[
        "correct",
        "--input",
        path(&data("received.clsf")),
        "--vocab",
        path(&data("toy.vocab")),
        "--ngram-model",
        path(&model),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), stdout(&correct("fused")));
}

#[test]
fn transmit_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = clsec(&["transmit", "--text", "the cat sat", "--snr-db", "4", "--seed", "3", "--output", path(&p)]);
        assert_eq!(out.status.code(), Some(0));
        fs::read(p).unwrap()
    };
    assert_eq!(run("a.clsf"), run("b.clsf"));
}

#[test]
fn bare_boolean_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = clsec(&[
        "simulate",
        "--corpus",
        path(&data("toy.txt")),
        "--vocab",
        path(&data("toy.vocab")),
        "--len",
        "3",
        "--trials",
        "2",
        "--snr-db",
        "4",
        "--protect-delimiters",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("protect delimiters: true"));
}
