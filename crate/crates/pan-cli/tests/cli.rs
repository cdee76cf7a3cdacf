//! End-to-end tests of the `pan` binary: every subcommand through its real
//! process boundary, with exit codes and on-disk artifacts checked.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pan"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    pan()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("pan binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        stdout(out),
        stderr(out)
    );
}

fn assert_exit(out: &Output, code: i32, needle: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        stdout(out),
        stderr(out)
    );
    assert!(
        stderr(out).contains(needle),
        "stderr missing {needle:?}: {}",
        stderr(out)
    );
}

/// Generate a small corpus into `dir/data` and return its file paths.
fn synth_small(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let out = run(
        &[
            "synth",
            "--out-dir",
            "data",
            "--seed",
            "5",
            "--roots",
            "2",
            "--branching",
            "2",
            "--depth",
            "2",
            "--train-entities",
            "10",
            "--test-entities",
            "4",
        ],
        dir,
    );
    assert_ok(&out);
    (
        dir.join("data/hierarchy.txt"),
        dir.join("data/train.jsonl"),
        dir.join("data/test.jsonl"),
    )
}

const SMALL_TRAIN: &[&str] = &[
    "--epochs", "3", "--d-w", "4", "--d-h", "4", "--d", "4", "--lr", "0.01",
];

#[test]
fn synth_train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (hierarchy, train, test) = synth_small(dir.path());

    let out = run(
        &[
            &[
                "train",
                "--hierarchy",
                hierarchy.to_str().unwrap(),
                "--train-corpus",
                train.to_str().unwrap(),
                "--model",
                "model.bin",
                "--trace",
                "trace.csv",
            ],
            SMALL_TRAIN,
        ]
        .concat(),
        dir.path(),
    );
    assert_ok(&out);
    assert!(stdout(&out).contains("model written to model.bin"));

    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("epoch,total_loss,mean_loss\n"));
    assert_eq!(trace.lines().count(), 4, "header plus one row per epoch");

    let out = run(
        &[
            "eval",
            "--hierarchy",
            hierarchy.to_str().unwrap(),
            "--test-corpus",
            test.to_str().unwrap(),
            "--model",
            "model.bin",
            "--report",
            "report.json",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    for key in [
        "strict_acc",
        "loose_macro_f1",
        "loose_micro_f1",
        "mention_count",
        "pooled_intersection",
        "pooled_predicted",
        "pooled_gold",
    ] {
        assert!(report.get(key).is_some(), "report missing {key}");
    }
    // The same JSON is printed to stdout.
    assert!(stdout(&out).contains("strict_acc"));

    let out = run(
        &[
            "predict",
            "--hierarchy",
            hierarchy.to_str().unwrap(),
            "--test-corpus",
            test.to_str().unwrap(),
            "--model",
            "model.bin",
            "--predictions",
            "preds.jsonl",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let preds = fs::read_to_string(dir.path().join("preds.jsonl")).unwrap();
    let test_lines = fs::read_to_string(&test).unwrap().lines().count();
    assert_eq!(preds.lines().count(), test_lines, "one prediction per mention");
    for line in preds.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["entity", "tokens", "span", "types", "predicted"] {
            assert!(v.get(key).is_some(), "prediction missing {key}: {line}");
        }
    }
}

#[test]
fn identical_runs_write_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (hierarchy, train, _) = synth_small(dir.path());
    for (model, trace) in [("a.bin", "a.csv"), ("b.bin", "b.csv")] {
        let out = run(
            &[
                &[
                    "train",
                    "--hierarchy",
                    hierarchy.to_str().unwrap(),
                    "--train-corpus",
                    train.to_str().unwrap(),
                    "--model",
                    model,
                    "--trace",
                    trace,
                    "--seed",
                    "11",
                ],
                SMALL_TRAIN,
            ]
            .concat(),
            dir.path(),
        );
        assert_ok(&out);
    }
    assert_eq!(
        fs::read(dir.path().join("a.bin")).unwrap(),
        fs::read(dir.path().join("b.bin")).unwrap(),
        "model files differ between identical runs"
    );
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap(),
        "loss traces differ between identical runs"
    );
}

#[test]
fn rerunning_synth_reproduces_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "synth",
        "--seed",
        "9",
        "--train-entities",
        "6",
        "--test-entities",
        "3",
        "--noise-rate",
        "0.5",
    ];
    let out = run(&[&args[..], &["--out-dir", "one"]].concat(), dir.path());
    assert_ok(&out);
    let out = run(&[&args[..], &["--out-dir", "two"]].concat(), dir.path());
    assert_ok(&out);
    for file in ["hierarchy.txt", "train.jsonl", "test.jsonl"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(file)).unwrap(),
            fs::read(dir.path().join("two").join(file)).unwrap(),
            "{file} differs between identical synth runs"
        );
    }
}

#[test]
fn missing_hierarchy_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (_, train, _) = synth_small(dir.path());
    let out = run(
        &[
            "train",
            "--hierarchy",
            "missing.txt",
            "--train-corpus",
            train.to_str().unwrap(),
            "--model",
            "m.bin",
        ],
        dir.path(),
    );
    assert_exit(&out, 2, "hierarchy file not found");
}

#[test]
fn missing_required_path_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train"], dir.path());
    assert_exit(&out, 2, "--hierarchy");
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[train]\nbogus = 1\n").unwrap();
    let out = run(&["train", "--config", "bad.toml"], dir.path());
    assert_exit(&out, 2, "bogus");
}

#[test]
fn bad_mode_flag_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (hierarchy, train, _) = synth_small(dir.path());
    let out = run(
        &[
            "train",
            "--hierarchy",
            hierarchy.to_str().unwrap(),
            "--train-corpus",
            train.to_str().unwrap(),
            "--model",
            "m.bin",
            "--mode",
            "PAN-Z",
        ],
        dir.path(),
    );
    assert_exit(&out, 2, "PAN-Z");
}

#[test]
fn config_file_drives_a_run_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let (hierarchy, train, _) = synth_small(dir.path());
    fs::write(
        dir.path().join("run.toml"),
        format!(
            r#"
[paths]
hierarchy = {hierarchy:?}
train_corpus = {train:?}
model = "from-file.bin"
trace = "trace.csv"

[train]
epochs = 5
d_w = 4
d_h = 4
d = 4
"#
        ),
    )
    .unwrap();
    // Flag overrides the file's epochs = 5.
    let out = run(&["train", "--config", "run.toml", "--epochs", "2"], dir.path());
    assert_ok(&out);
    assert!(dir.path().join("from-file.bin").exists());
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3, "header plus the two flag-won epochs");
}

#[test]
fn eval_refuses_a_hierarchy_with_a_different_type_count() {
    let dir = tempfile::tempdir().unwrap();
    let (hierarchy, train, test) = synth_small(dir.path());
    let out = run(
        &[
            &[
                "train",
                "--hierarchy",
                hierarchy.to_str().unwrap(),
                "--train-corpus",
                train.to_str().unwrap(),
                "--model",
                "m.bin",
            ],
            SMALL_TRAIN,
        ]
        .concat(),
        dir.path(),
    );
    assert_ok(&out);
    fs::write(dir.path().join("other.txt"), "/x\n/y\n").unwrap();
    let out = run(
        &[
            "eval",
            "--hierarchy",
            "other.txt",
            "--test-corpus",
            test.to_str().unwrap(),
            "--model",
            "m.bin",
        ],
        dir.path(),
    );
    assert_exit(&out, 2, "6 types but the hierarchy defines 2");
}

#[test]
fn eval_refuses_a_renamed_hierarchy_with_the_same_shape() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h1.txt"), "/a\n/b\n").unwrap();
    fs::write(dir.path().join("h2.txt"), "/a\n/c\n").unwrap();
    let corpus = concat!(
        r#"{"entity":"e0","tokens":["ent","x"],"span":[0,1],"types":["/a"]}"#,
        "\n",
        r#"{"entity":"e1","tokens":["ent","y"],"span":[0,1],"types":["/b"]}"#,
        "\n"
    );
    fs::write(dir.path().join("c.jsonl"), corpus).unwrap();
    let out = run(
        &[
            &[
                "train",
                "--hierarchy",
                "h1.txt",
                "--train-corpus",
                "c.jsonl",
                "--model",
                "m.bin",
            ],
            SMALL_TRAIN,
        ]
        .concat(),
        dir.path(),
    );
    assert_ok(&out);
    // Same type count, different content: only the digest can tell.
    let corpus2 = concat!(
        r#"{"entity":"e0","tokens":["ent","x"],"span":[0,1],"types":["/a"]}"#,
        "\n",
        r#"{"entity":"e1","tokens":["ent","y"],"span":[0,1],"types":["/c"]}"#,
        "\n"
    );
    fs::write(dir.path().join("c2.jsonl"), corpus2).unwrap();
    let out = run(
        &[
            "eval",
            "--hierarchy",
            "h2.txt",
            "--test-corpus",
            "c2.jsonl",
            "--model",
            "m.bin",
        ],
        dir.path(),
    );
    assert_exit(&out, 2, "different hierarchy");
}

#[test]
fn malformed_corpus_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let (hierarchy, _, _) = synth_small(dir.path());
    fs::write(
        dir.path().join("bad.jsonl"),
        concat!(
            r#"{"entity":"e0","tokens":["ent"],"span":[0,1],"types":["/a0"]}"#,
            "\nnot json\n"
        ),
    )
    .unwrap();
    let out = run(
        &[
            "train",
            "--hierarchy",
            hierarchy.to_str().unwrap(),
            "--train-corpus",
            "bad.jsonl",
            "--model",
            "m.bin",
        ],
        dir.path(),
    );
    assert_exit(&out, 2, "bad.jsonl:2");
}

#[test]
fn corrupt_model_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (hierarchy, _, test) = synth_small(dir.path());
    // Valid magic and version followed by a truncated body.
    let mut bytes = b"PANMODEL".to_vec();
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(b"junk");
    fs::write(dir.path().join("m.bin"), &bytes).unwrap();
    let out = run(
        &[
            "eval",
            "--hierarchy",
            hierarchy.to_str().unwrap(),
            "--test-corpus",
            test.to_str().unwrap(),
            "--model",
            "m.bin",
        ],
        dir.path(),
    );
    assert_exit(&out, 2, "corrupt");
}

#[test]
fn gradcheck_command_passes_on_the_builtin_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["gradcheck", "--seed", "2", "--d-w", "4", "--d-h", "4", "--d", "4"],
        dir.path(),
    );
    assert_ok(&out);
    assert!(stdout(&out).contains("overall: PASS"), "{}", stdout(&out));
}

#[test]
fn experiment_writes_rows_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "experiment",
            "--modes",
            "PAN-A,uniform",
            "--seeds",
            "0,1",
            "--train-entities",
            "6",
            "--test-entities",
            "3",
            "--epochs",
            "2",
            "--d-w",
            "4",
            "--d-h",
            "4",
            "--d",
            "4",
            "--report",
            "exp.json",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("exp.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4, "2 modes x 2 seeds");
    assert_eq!(v["summaries"].as_array().unwrap().len(), 2);
    assert_eq!(v["rows"][0]["mode"], "PAN-A");
    assert!(v["rows"][0]["loose_micro_f1"].is_number());
    assert!(v["summaries"][0]["micro_mean"].is_number());
}

#[test]
fn experiment_rejects_the_single_mode_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["experiment", "--mode", "AN"], dir.path());
    assert_exit(&out, 2, "--modes");
}

#[test]
fn no_arguments_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pan().current_dir(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
