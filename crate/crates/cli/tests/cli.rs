use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use goalrec_core::dataset::{hex_digest, MANIFEST_FILE, RECORDS_FILE};
use goalrec_core::neural::LstmModel;

fn goalrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goalrec")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen(dir: &Path, extra: &[&str]) {
    let mut args = vec!["gen", "--domain", "hanoi34", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = goalrec(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

/// Rewrites the records file and patches the manifest checksum to match,
/// so only the record-level checks can object.
fn rewrite_records(dir: &Path, edit: impl FnOnce(String) -> String) {
    let rec = dir.join(RECORDS_FILE);
    let text = edit(fs::read_to_string(&rec).unwrap());
    fs::write(&rec, &text).unwrap();
    let man = dir.join(MANIFEST_FILE);
    let mut manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&man).unwrap()).unwrap();
    manifest["records_sha256"] = hex_digest(text.as_bytes()).into();
    fs::write(&man, manifest.to_string()).unwrap();
}

#[test]
fn gen_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let flags = ["--problems", "6", "--candidates", "4", "--seed", "7"];
    gen(&a, &flags);
    gen(&b, &flags);
    assert_eq!(fs::read(a.join(RECORDS_FILE)).unwrap(), fs::read(b.join(RECORDS_FILE)).unwrap());
    assert_eq!(fs::read(a.join(MANIFEST_FILE)).unwrap(), fs::read(b.join(MANIFEST_FILE)).unwrap());
    let c = tmp.path().join("c");
    gen(&c, &["--problems", "6", "--candidates", "4", "--seed", "8"]);
    assert_ne!(fs::read(a.join(RECORDS_FILE)).unwrap(), fs::read(c.join(RECORDS_FILE)).unwrap());
}

#[test]
fn train_bench_and_unknown_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("h");
    gen(&data, &["--unknown-problems", "2", "--traces-per-goal", "3"]);
    let model = tmp.path().join("m.json");
    let o = goalrec(&["train", "--data", data.to_str().unwrap(), "--out", model.to_str().unwrap(), "--max-epochs", "200", "--patience", "2", "--learning-rate", "0.01"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("(early stop)") && out.contains("training time"), "{out}");
    let m = LstmModel::load(&model).unwrap();
    assert_eq!((m.model.embed, m.model.hidden), (64, 128));

    let bench_dir = tmp.path().join("bench");
    let o = goalrec(&["bench", "--data", data.to_str().unwrap(), "--model", model.to_str().unwrap(), "--format", "csv", "--out", bench_dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv, fs::read_to_string(bench_dir.join("bench.csv")).unwrap());
    // 5 levels x (pom_gc, pom_uniq at two thetas + rg + lstm)
    assert_eq!(csv.lines().count(), 1 + 5 * 6);
    for line in csv.lines().skip(1).filter(|l| l.contains(",lstm,")) {
        let spread: f64 = line.split(',').nth(9).unwrap().parse().unwrap();
        assert_eq!(spread, 1.0, "{line}");
    }
    assert!(fs::read_to_string(bench_dir.join("problems.csv")).unwrap().lines().count() > 100);

    let o = goalrec(&["unknown", "--data", data.to_str().unwrap(), "--model", model.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let all = rows.as_array().unwrap().last().unwrap();
    assert_eq!(all["records"], 10);
    assert!(all["exact_rate"].as_f64().unwrap() <= 0.2);
}

#[test]
fn paper_scale_sets_checkpoint_dims() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("h");
    gen(&data, &["--problems", "1", "--candidates", "2", "--traces-per-goal", "1", "--levels", "100"]);
    let model = tmp.path().join("m.json");
    let o = goalrec(&["train", "--data", data.to_str().unwrap(), "--out", model.to_str().unwrap(), "--paper-scale", "--max-epochs", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = LstmModel::load(&model).unwrap();
    assert_eq!((m.model.embed, m.model.hidden), (1000, 512));
    assert_eq!(m.params.dims.hidden, 512);
}

#[test]
fn corrupted_line_is_named_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("h");
    gen(&data, &["--traces-per-goal", "1"]);
    rewrite_records(&data, |text| {
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[4] = lines[4].replacen('{', "{{", 1);
        lines.join("\n") + "\n"
    });
    let o = goalrec(&["train", "--data", data.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(":5:"), "{}", stderr(&o));
}

#[test]
fn checksum_mismatch_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("h");
    gen(&data, &["--traces-per-goal", "1"]);
    let rec = data.join(RECORDS_FILE);
    let text = fs::read_to_string(&rec).unwrap();
    fs::write(&rec, text.replacen("\"level\":100", "\"level\":70", 1)).unwrap();
    let o = goalrec(&["bench", "--data", data.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn leaked_unknown_goal_fails_split_hygiene() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("h");
    gen(&data, &["--unknown-problems", "2", "--traces-per-goal", "1"]);
    rewrite_records(&data, |text| text.replacen("\"split\":\"unknown_goal_test\"", "\"split\":\"train\"", 1));
    let o = goalrec(&["bench", "--data", data.to_str().unwrap(), "--recognizers", "pom_gc"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("also occurs in training"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&goalrec(&[])), 1);
    assert_eq!(code(&goalrec(&["gen", "--domain", "sokoban"])), 1);
    assert_eq!(code(&goalrec(&["bench", "--data", "x", "--recognizers", ""])), 1);
    assert_eq!(code(&goalrec(&["oracle", "--inject-fault", "nope"])), 1);
    assert_eq!(code(&goalrec(&["--help"])), 0);

    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("h");
    gen(&data, &["--traces-per-goal", "1"]);
    let o = goalrec(&["bench", "--data", data.to_str().unwrap(), "--recognizers", "lstm"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("needs a checkpoint"), "{}", stderr(&o));
    let o = goalrec(&["unknown", "--data", data.to_str().unwrap(), "--model", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_passes_and_catches_planted_faults() {
    let small = ["--planner-cases", "2", "--landmark-cases", "2", "--gradient-seeds", "3", "--codec-samples", "100"];
    let mut args = vec!["oracle"];
    args.extend_from_slice(&small);
    let o = goalrec(&args);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{out}");
    assert!(out.contains("max relative error"));

    for (fault, suite) in [("off_by_one_apply", "planner"), ("flipped_bit", "codec"), ("scaled_gradient", "gradient")] {
        let mut args = vec!["oracle", "--suite", suite, "--inject-fault", fault];
        args.extend_from_slice(&small);
        let o = goalrec(&args);
        assert_eq!(code(&o), 2, "{fault}");
        assert!(stdout(&o).starts_with("FAIL"), "{}", stdout(&o));
    }
}
