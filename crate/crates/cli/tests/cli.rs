use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onset-cvi"))
        .args(args)
        .current_dir(dir)
        .env_remove("ONSET_CVI_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "[dataset]\npath = \"data/synth.csv\"\nlabel_column = \"label\"\n\n\
[search]\nk_min = 2\nk_max = 4\nsubset_size = 2\nshape = { enabled = true }\n\n\
[vote]\ntop_n = 3\n\n\
[report]\ntruth = \"data/truth.json\"\n\n\
[synth]\nn_events = 300\ninformative = 2\nnuisance = 3\nsource_features = 1\ndurations = [5.0, 5.0, 5.0]\n";

fn small_run(dir: &Path) {
    write(dir, "run.toml", SMALL);
    assert_eq!(
        code(&run(dir, &["synth", "-c", "run.toml", "-o", "data"])),
        0
    );
}

#[test]
fn empty_dataset_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty.csv", "time,a,b\n");
    write(dir.path(), "run.toml", "[dataset]\npath = \"empty.csv\"\n");
    let out = run(dir.path(), &["search", "-c", "run.toml"]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn all_combinations_skipped_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Two distinct rows cannot fill three clusters.
    let mut csv = String::from("time,a,b\n");
    for i in 0..20 {
        csv.push_str(&format!("{i},{},{}\n", i % 2, i % 2));
    }
    write(dir.path(), "flat.csv", &csv);
    write(
        dir.path(),
        "run.toml",
        "[dataset]\npath = \"flat.csv\"\n[search]\nk_min = 3\nk_max = 4\nsubset_size = 2\n",
    );
    assert_eq!(code(&run(dir.path(), &["search", "-c", "run.toml"])), 2);
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "[search]\nk_mn = 3\n");
    assert_eq!(code(&run(dir.path(), &["search", "-c", "bad.toml"])), 1);
    assert_eq!(code(&run(dir.path(), &["search"])), 1);
    assert_eq!(code(&run(dir.path(), &["search", "-c", "missing.toml"])), 1);
    assert_eq!(code(&run(dir.path(), &["no-such-command"])), 1);
}

#[test]
fn invalid_synth_params_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.toml", "[synth]\ndurations = [1.0, -2.0]\n");
    assert_eq!(code(&run(dir.path(), &["synth", "-c", "s.toml"])), 1);
    write(dir.path(), "s.toml", "[synth]\nn_events = 2\n");
    assert_eq!(code(&run(dir.path(), &["synth", "-c", "s.toml"])), 1);
}

#[test]
fn synth_writes_data_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.toml",
        "[synth]\ndurations = [10.0, 8.5, 7.0, 5.0, 3.0, 2.0, 1.5]\nn_events = 500\n",
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["synth", "-c", "s.toml", "-o", "o", "--seed", "3"]
        )),
        0
    );
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/truth.json")).unwrap())
            .unwrap();
    assert_eq!(truth["provenance"]["seed"], 3);
    let cps: Vec<f64> = truth["truth"]["change_points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(cps, vec![0.0, 10.0, 18.5, 25.5, 30.5, 33.5, 35.5]);
    let csv = std::fs::read_to_string(dir.path().join("o/synth.csv")).unwrap();
    assert_eq!(csv.lines().count(), 501);
    assert!(csv.lines().next().unwrap().ends_with(",label"));
}

#[test]
fn repeated_search_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path());
    assert_eq!(
        code(&run(dir.path(), &["search", "-c", "run.toml", "-o", "a"])),
        0
    );
    assert_eq!(
        code(&run(dir.path(), &["search", "-c", "run.toml", "-o", "b"])),
        0
    );
    for name in [
        "manifest.json",
        "partitions.csv",
        "histogram.csv",
        "partitions_vote.csv",
        "histogram_vote.csv",
        "vote.json",
    ] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("config_hash"), "{name} lacks provenance");
        assert!(!text.contains('\r'));
    }
    // A different seed changes the recorded seed.
    assert_eq!(
        code(&run(
            dir.path(),
            &["search", "-c", "run.toml", "-o", "c", "--seed", "9"]
        )),
        0
    );
    let hist = std::fs::read_to_string(dir.path().join("c/histogram.csv")).unwrap();
    assert!(hist.lines().next().unwrap().contains("seed=9"));
}

#[test]
fn eval_and_report_after_search() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path());
    assert_eq!(
        code(&run(dir.path(), &["search", "-c", "run.toml", "-o", "o"])),
        0
    );
    let out = run(dir.path(), &["eval", "-c", "run.toml", "-o", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("o/rand_summary.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "k,criterion,count,min,q1,median,q3,max,outliers");
    // K = 2..4, both criteria.
    assert_eq!(rows.len(), 1 + 6);
    assert!(rows.iter().any(|r| r.starts_with("3,shape,")));

    let out = run(dir.path(), &["report", "-c", "run.toml", "-o", "o"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("change points detected"));
    assert!(text.contains("Borda"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn eval_of_perfect_partitions_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "p.csv",
        "t,label,k2_0-1,k2_1-2,k3_0-2\n0,1,2,1,3\n1,1,2,1,3\n2,2,1,2,1\n3,2,1,2,1\n4,3,1,2,2\n",
    );
    let out = run(dir.path(), &["eval", "-o", "o", "p.csv"]);
    assert_eq!(code(&out), 0);
    let table = std::fs::read_to_string(dir.path().join("o/rand_summary.csv")).unwrap();
    let k3: Vec<&str> = table
        .lines()
        .find(|l| l.starts_with("3,"))
        .unwrap()
        .split(',')
        .collect();
    assert_eq!(&k3[3..8], &["1", "1", "1", "1", "1"]);
}

#[test]
fn eval_without_truth_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.csv", "t,k2_0-1\n0,1\n1,2\n2,2\n");
    assert_eq!(code(&run(dir.path(), &["eval", "-o", "o", "p.csv"])), 1);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.toml",
        "[synth]\nn_events = 50\ndurations = [1.0]\n",
    );
    let status = Command::new(env!("CARGO_BIN_EXE_onset-cvi"))
        .args(["synth", "-c", "s.toml"])
        .current_dir(dir.path())
        .env("ONSET_CVI_OUTPUT_DIR", "fromenv")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("fromenv/synth.csv").exists());
}

#[test]
fn stream_prints_one_line_per_new_cluster() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "events.csv",
        "t,cluster_id\n0,1\n1,1\n2,2\n3,1\n5,3\n",
    );
    let out = run(
        dir.path(),
        &["stream", "--t-end", "10", "--input", "events.csv"],
    );
    assert_eq!(code(&out), 0);
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["k_so_far"], 3);
    assert!(lines[0]["quality"].is_null());

    write(dir.path(), "bad.csv", "2,1\n1,2\n");
    let out = run(
        dir.path(),
        &["stream", "--t-end", "10", "--input", "bad.csv"],
    );
    assert_eq!(code(&out), 1);
}
