use std::path::Path;
use std::process::{Command, Output};

use rovist::coherence::{CoherenceModel, HashedBagEncoder, SopHead};
use rovist::vg::VgEncoderParams;

fn rovist(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rovist"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("ROVIST_CACHE_DIR")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "stories.jsonl",
        concat!(
            r#"{"story_id":"s1","model_id":"m1","sentences":["the dog ran to the park.","then the dog slept."],"image_ids":["i1","i2"]}"#,
            "\n",
            r#"{"story_id":"s2","model_id":"m1","sentences":["a cake on the table.","we ate the cake."],"image_ids":["i2","i3"]}"#,
            "\n",
        ),
    );
    write(
        d,
        "regions.jsonl",
        concat!(
            r#"{"image_id":"i1","bbox":[0,0,5,5],"confidence":0.9,"features":[0.1,0.2,0.3,0.4]}"#,
            "\n",
            r#"{"image_id":"i2","bbox":[1,1,5,5],"confidence":0.8,"features":[0.4,-0.2,0.1,0.0]}"#,
            "\n",
        ),
    );
    VgEncoderParams::init(4, 300, 16, 1).save(d.join("vg.bin")).unwrap();
    CoherenceModel::new(Box::new(HashedBagEncoder::new(8, 64)), SopHead::init(16, 1))
        .unwrap()
        .save(d.join("c.json"))
        .unwrap();
    dir
}

fn lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn missing_stories_flag_is_usage_error() {
    let dir = fixture();
    let out = rovist(dir.path(), &["score"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_usage_error() {
    let dir = fixture();
    let out = rovist(dir.path(), &["score", "--stories", "nope.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));
}

#[test]
fn grounding_without_artifact_is_usage_error() {
    let dir = fixture();
    let out = rovist(dir.path(), &["score", "--stories", "stories.jsonl", "--only", "vg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nr_only_run_reports_absent_components() {
    let dir = fixture();
    let out = rovist(dir.path(), &["score", "--stories", "stories.jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    let l = lines(&out);
    assert_eq!(l.len(), 3);
    assert!(l[0]["vg_scaled"].is_null());
    assert!(l[0]["coherence"].is_null());
    assert_eq!(l[0]["total"], l[0]["nr"]);
    assert!(l[2].get("summary").is_some());
}

#[test]
fn partial_failure_exits_one() {
    let dir = fixture();
    // i3 has no regions, so s2 cannot be grounded
    let out = rovist(
        dir.path(),
        &["score", "--stories", "stories.jsonl", "--regions", "regions.jsonl", "--vg", "vg.bin", "--c", "c.json"],
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let l = lines(&out);
    assert_eq!(l[0]["story_id"], "s1");
    assert!(l[0]["vg_scaled"].is_number());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("i3"));
}

#[test]
fn config_file_supplies_flags() {
    let dir = fixture();
    write(dir.path(), "run.conf", "stories = stories.jsonl\nngram = 2\nout = r.jsonl\n");
    let out = rovist(dir.path(), &["score", "--config", "run.conf"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("r.jsonl").is_file());
}

#[test]
fn build_and_train_round_trip() {
    let dir = fixture();
    let d = dir.path();
    assert_eq!(rovist(d, &["build-idf", "--stories", "stories.jsonl", "--out", "idf.json"]).status.code(), Some(0));
    let idf: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("idf.json")).unwrap()).unwrap();
    assert_eq!(idf["N"], 2);

    let out = rovist(d, &["build-sop", "--stories", "stories.jsonl", "--out", "sop.jsonl", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(d.join("sop.jsonl")).unwrap().lines().count(), 4);

    let out = rovist(
        d,
        &["train-c", "--sop", "sop.jsonl", "--out", "c2.json", "--max-epochs", "2", "--segment-dim", "8", "--lr", "0.01"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = rovist(d, &["score", "--stories", "stories.jsonl", "--c", "c2.json", "--idf-table", "idf.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(lines(&out)[0]["coherence"].is_number());

    write(
        d,
        "pairs.jsonl",
        concat!(
            r#"{"entity":"the dog","bbox":[0,0,2,2],"features":[1,0,0]}"#,
            "\n",
            r#"{"entity":"a red cake","bbox":[0,0,2,2],"features":[0,1,0]}"#,
            "\n",
            r#"{"entity":"park","bbox":[0,0,2,2],"features":[0,0,1]}"#,
            "\n",
        ),
    );
    let out = rovist(
        d,
        &["train-vg", "--pairs", "pairs.jsonl", "--out", "vg2.bin", "--max-epochs", "2", "--embed-dim", "8", "--batch", "2"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = VgEncoderParams::load(d.join("vg2.bin")).unwrap();
    assert_eq!((p.image_in(), p.text_in(), p.embed_dim()), (3, 300, 8));
}

#[test]
fn correlate_prints_table() {
    let dir = fixture();
    let d = dir.path();
    let mut reports = String::new();
    let mut judgments = String::new();
    for (i, score) in [0.2, 0.9, 0.5, 0.7].iter().enumerate() {
        reports += &format!(
            "{{\"story_id\":\"s{i}\",\"model_id\":\"m\",\"vg_scaled\":null,\"coherence\":null,\"nr\":{score},\"total\":{score}}}\n"
        );
        let h = 1 + (score * 4.0f64).round() as i64;
        judgments += &format!(
            "{{\"story_id\":\"s{i}\",\"model_id\":\"m\",\"annotator_id\":\"u\",\"grounding\":{h},\"coherence\":{h},\"non_redundancy\":{h},\"voted_best\":false}}\n"
        );
    }
    write(d, "reports.jsonl", &reports);
    write(d, "judgments.jsonl", &judgments);
    let out = rovist(d, &["correlate", "--reports", "reports.jsonl", "--judgments", "judgments.jsonl"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("overall"));
    assert!(row.contains("1.000"));
}
