use std::path::Path;
use std::process::{Command, Output};

fn kano(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kano"))
        .args(args)
        .env_remove("KANO_DATA_DIR")
        .env_remove("KANO_ADAPTER")
        .output()
        .expect("kano runs")
}

fn ok(args: &[&str]) -> String {
    let out = kano(args);
    assert!(
        out.status.success(),
        "kano {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_toy(dir: &Path) -> String {
    let path = dir.join("toy.jsonl");
    let rows = [
        ("app crash on start", 0),
        ("crash after login", 0),
        ("sync is slow", 1),
        ("battery drain slow", 1),
        ("surprise widget", 2),
        ("amazing widget theme", 2),
        ("bought phone", 3),
        ("phone weekend", 3),
    ];
    let body: String = rows
        .iter()
        .enumerate()
        .map(|(i, (t, l))| {
            format!("{{\"id\":\"{i}\",\"text\":\"{t}\",\"label\":{l},\"agreement\":\"unknown\",\"source\":\"toy\"}}\n")
        })
        .collect();
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn help_on_every_verb() {
    for verb in [
        "ingest",
        "preprocess",
        "train",
        "predict",
        "experiment",
        "report",
    ] {
        let out = kano(&[verb, "--help"]);
        assert!(out.status.success(), "{verb} --help");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    assert!(kano(&["--help"]).status.success());
}

#[test]
fn unknown_verbs_and_flags_fail_with_usage() {
    for args in [&["frobnicate"][..], &["predict", "--bogus", "x"], &[]] {
        let out = kano(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("Usage"),
            "{args:?}"
        );
    }
}

#[test]
fn all_oov_text_predicts_basic() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy(dir.path());
    let model = dir.path().join("model.json");
    let model = model.to_str().unwrap();
    ok(&[
        "train",
        "--classifier",
        "keyword",
        "--data",
        &data,
        "--out",
        model,
    ]);
    assert_eq!(
        ok(&["predict", "--model", model, "--text", "zebra quantum"]),
        "basic (0)\n"
    );
    assert_eq!(
        ok(&["predict", "--model", model, "--text", "widget", "--text", "slow"]),
        "delighter (2)\nperformance (1)\n"
    );
}

#[test]
fn logreg_and_mock_adapter_models_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy(dir.path());
    let lr = dir.path().join("lr.json");
    ok(&[
        "train",
        "--classifier",
        "logreg",
        "--data",
        &data,
        "--out",
        lr.to_str().unwrap(),
        "--C",
        "10",
    ]);
    assert_eq!(
        ok(&[
            "predict",
            "--model",
            lr.to_str().unwrap(),
            "--text",
            "phone"
        ]),
        "irrelevant (3)\n"
    );

    let mock = dir.path().join("mock.json");
    ok(&[
        "train",
        "--classifier",
        "adapter",
        "--endpoint",
        "mock:constant=delighter",
        "--data",
        &data,
        "--out",
        mock.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&mock).unwrap();
    assert!(text.contains("\"model_id\":\"m-1\""), "{text}");

    let out = kano(&[
        "train",
        "--classifier",
        "adapter",
        "--data",
        &data,
        "--out",
        mock.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("KANO_ADAPTER"));
}

#[test]
fn preprocess_stats_count_removals() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.jsonl");
    let texts = [
        "The app keeps crashing when I open it",
        "the app keeps   CRASHING when i open it",
        "Please add a dark mode to the app",
        "I love the new widget, it is great",
        "Sync is very slow on my phone",
        "sync is very slow on my phone",
        "Battery drains too fast since the update",
        "Cannot log in with my account anymore",
        "Great app for planning my weekend",
        "The search results are much better now",
    ];
    let body: String = texts
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{{\"id\":\"{i}\",\"text\":\"{t}\",\"label\":{},\"agreement\":\"unknown\",\"source\":\"s\"}}\n", i % 4))
        .collect();
    std::fs::write(&input, body).unwrap();
    let out = dir.path().join("clean.jsonl");
    let stats = ok(&[
        "preprocess",
        "--in",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--stats",
    ]);
    assert_eq!(
        stats,
        "input=10 duplicates=2 non_english=0 no_words=0 retained=8\n"
    );
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 8);
}

#[test]
fn ingest_csv_with_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("export.csv");
    std::fs::write(
        &csv,
        "review,kano,agreed\n\"Crashes, every time\",Basic Feature,yes\nToo slow,Performance Feature,no\n",
    )
    .unwrap();
    let map = dir.path().join("map.toml");
    std::fs::write(
        &map,
        "text = \"review\"\nlabel = \"kano\"\nagreement = \"agreed\"\n\n[labels]\n\"Basic Feature\" = \"basic\"\n\"Performance Feature\" = \"performance\"\n",
    )
    .unwrap();
    let out = dir.path().join("canonical.jsonl");
    ok(&[
        "ingest",
        "--in",
        csv.to_str().unwrap(),
        "--format",
        "csv",
        "--map",
        map.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "{\"id\":\"0\",\"text\":\"Crashes, every time\",\"label\":0,\"agreement\":\"unanimous\",\"source\":\"export\"}\n\
         {\"id\":\"1\",\"text\":\"Too slow\",\"label\":1,\"agreement\":\"tiebroken\",\"source\":\"export\"}\n"
    );

    std::fs::write(&csv, "review,kano,agreed\nHello,Rejection,yes\n").unwrap();
    let failed = kano(&[
        "ingest",
        "--in",
        csv.to_str().unwrap(),
        "--format",
        "csv",
        "--map",
        map.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).contains("Rejection"));
}

#[test]
fn experiment_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy(dir.path());
    let out = dir.path().join("out");
    let run = kano(&[
        "experiment",
        "--config",
        "rq1-baselines",
        "--dataset",
        &format!("stanik={data}"),
        "--runs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    // Eight reviews cannot be split into ten folds.
    assert!(!run.status.success());

    let config = dir.path().join("small.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"protocol":"rq1","classifiers":[{{"kind":"keyword"}}],"k":2,"n_undersample_runs":2,
                "datasets":{{"stanik":{{"path":"{data}","format":"canonical"}}}}}}"#
        ),
    )
    .unwrap();
    let run = kano(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stderr).contains("seed 42"));
    assert!(run.stdout.is_empty(), "progress must stay off stdout");

    let md = ok(&["report", "--in", out.to_str().unwrap(), "--format", "md"]);
    assert_eq!(md, std::fs::read_to_string(out.join("report.md")).unwrap());
    let csv = ok(&[
        "report",
        "--in",
        out.join("runs.json").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(csv.starts_with("classifier,accuracy,basic_precision"));
    assert!(
        !kano(&["report", "--in", out.to_str().unwrap(), "--format", "pdf"])
            .status
            .success()
    );
}

#[test]
fn missing_config_is_an_error() {
    let out = kano(&[
        "experiment",
        "--config",
        "no-such-config",
        "--out",
        "/tmp/unused",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-config"));
}
