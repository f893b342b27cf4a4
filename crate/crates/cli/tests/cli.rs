use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn autoprompt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autoprompt"))
        .args(args)
        .env_remove("LLM_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn pipeline_with_gold_echo_scores_full_marks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = autoprompt(&[
        "pipeline",
        "--pool",
        &data("pool_en.json"),
        "--dataset",
        &data("cne_en_test.json"),
        "--seed",
        "7",
        "--out",
        out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("accuracy: 100.00%"));
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eval.json")).unwrap())
            .unwrap();
    assert_eq!(eval["accuracy_percent"], "100.00");
}

#[test]
fn generate_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let gen_out = dir.path().join("gen");
    let o = autoprompt(&[
        "generate",
        "--pool",
        &data("pool_de.json"),
        "--language",
        "de",
        "--seed",
        "3",
        "--out",
        gen_out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let prompt = gen_out.join("prompt.txt");
    assert!(!std::fs::read_to_string(&prompt).unwrap().trim().is_empty());

    let o = autoprompt(&[
        "evaluate",
        "--dataset",
        &data("cne_de_test.json"),
        "--prompt",
        prompt.to_str().unwrap(),
        "--out",
        dir.path().join("eval").to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = std::fs::read_to_string(dir.path().join("eval/eval.txt")).unwrap();
    assert!(summary.contains("Accuracy"));
}

#[test]
fn missing_seed_is_drawn_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = autoprompt(&[
        "generate",
        "--pool",
        &data("pool_en.json"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let seed_line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("seed: "))
        .unwrap()
        .to_string();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(format!("seed: {}", manifest["seed"]), seed_line);
}

#[test]
fn tiny_pool_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.json");
    std::fs::write(
        &pool,
        r#"[{"input":"a","output":"b"},{"input":"c","output":"d"},{"input":"e","output":"f"}]"#,
    )
    .unwrap();
    let o = autoprompt(&[
        "generate",
        "--pool",
        pool.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn empty_dataset_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("empty.json");
    std::fs::write(&ds, "[]").unwrap();
    let prompt = dir.path().join("p.txt");
    std::fs::write(&prompt, "expand the column names\n").unwrap();
    let o = autoprompt(&[
        "evaluate",
        "--dataset",
        ds.to_str().unwrap(),
        "--prompt",
        prompt.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn http_backend_without_key_is_a_backend_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = autoprompt(&[
        "generate",
        "--pool",
        &data("pool_en.json"),
        "--backend",
        "http",
        "--base-url",
        "http://127.0.0.1:9/v1",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn record_then_replay_reproduces_the_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fixtures.json");
    let first = dir.path().join("a");
    let o = autoprompt(&[
        "generate",
        "--pool",
        &data("pool_en.json"),
        "--seed",
        "9",
        "--record",
        fx.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let second = dir.path().join("b");
    let o = autoprompt(&[
        "generate",
        "--pool",
        &data("pool_en.json"),
        "--seed",
        "9",
        "--backend",
        "replay",
        "--fixtures",
        fx.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        std::fs::read(first.join("prompt.txt")).unwrap(),
        std::fs::read(second.join("prompt.txt")).unwrap()
    );
}

#[test]
fn replay_without_fixtures_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = autoprompt(&[
        "generate",
        "--pool",
        &data("pool_en.json"),
        "--backend",
        "replay",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn make_pool_writes_a_loadable_pool() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pool.json");
    let o = autoprompt(&[
        "make-pool",
        "--dataset",
        &data("cne_en_examples.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(out).unwrap(),
        std::fs::read(data("pool_en.json")).unwrap()
    );
}

#[test]
fn bad_threshold_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = autoprompt(&[
        "pipeline",
        "--pool",
        &data("pool_en.json"),
        "--dataset",
        &data("cne_en_test.json"),
        "--threshold",
        "1.5",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
