use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fx(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn gesturekit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gesturekit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eval_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let clip = fx("dictionary/units/emphasis_3_0.json");
    let o = gesturekit(&["eval", "--ref", &clip, "--pred", &clip], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "total 0.000000"), "{text}");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn eval_mismatched_lengths_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(
        &["eval", "--ref", &fx("dictionary/units/emphasis_3_0.json"), "--pred", &fx("dictionary/units/emphasis_6_0.json")],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn segment_static_clip_finds_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<String> = (0..50).map(|_| "[[0,1,0],[0.2,1.4,0]]".to_string()).collect();
    let clip = format!(r#"{{"version":1,"fps":25,"joints":["a","b"],"frames":[{}]}}"#, frames.join(","));
    std::fs::write(dir.path().join("still.json"), clip).unwrap();
    let o = gesturekit(&["segment", "--input", "still.json", "--out", "units"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "0 units");
}

#[test]
fn segment_then_dict_build_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(&["segment", "--input", &fx("segmentation/performance.json"), "--out", "frag"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "3 units");
    let o = gesturekit(
        &["dict-build", "--fragment", "frag", "--labels", &fx("segmentation/labels.json"), "--out", "dict"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gesturekit(&["dict-check", "--dict", "dict"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "ok 3 units");
}

#[test]
fn dict_build_rejects_missing_labels() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gesturekit(&["segment", "--input", &fx("segmentation/performance.json"), "--out", "frag"], dir.path())
        .status
        .success());
    std::fs::write(dir.path().join("labels.json"), r#"{"labels":{}}"#).unwrap();
    let o = gesturekit(&["dict-build", "--fragment", "frag", "--labels", "labels.json", "--out", "dict"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("without labels"));
}

#[test]
fn dict_check_lists_unit_errors() {
    let dir = tempfile::tempdir().unwrap();
    let dict = dir.path().join("dict");
    copy_dir(&fixtures().join("dictionary"), &dict);
    let manifest = std::fs::read_to_string(dict.join("manifest.json")).unwrap();
    std::fs::write(dict.join("manifest.json"), manifest.replacen("\"stroke_apex\":", "\"stroke_apex\":9999,\"x\":", 1))
        .unwrap();
    let o = gesturekit(&["dict-check", "--dict", "dict"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    copy_dir(&fixtures().join("dictionary"), &dict);
    let unit = dict.join("units/emphasis_3_0.json");
    let text = std::fs::read_to_string(&unit).unwrap();
    std::fs::write(&unit, text.replacen("[[0.0,1.0,0.0]", "[[0.0,1.5,0.0]", 1)).unwrap();
    let o = gesturekit(&["dict-check", "--dict", "dict"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("emphasis_3_0"), "{}", stdout(&o));
}

#[test]
fn missing_dictionary_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(&["dict-check", "--dict", "nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_requires_a_timing_source() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(&["parse", "--text", &fx("talk.txt")], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(&["eval", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn textgrid_and_json_timings_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = gesturekit(&["parse", "--text", &fx("talk.txt"), "--timings", &fx("talk.timings.json")], dir.path());
    let b = gesturekit(&["parse", "--text", &fx("talk.txt"), "--textgrid", &fx("talk.TextGrid")], dir.path());
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let golden = std::fs::read_to_string(fixtures().join("golden/script.json")).unwrap();
    assert_eq!(stdout(&a).trim_end(), golden);
}

#[test]
fn alignment_mismatch_names_the_token() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.txt"), "Hello brave world.").unwrap();
    std::fs::write(
        dir.path().join("t.json"),
        r#"{"words":[{"word":"Hello","start_s":0.0,"end_s":0.3},{"word":"world","start_s":0.4,"end_s":0.8}]}"#,
    )
    .unwrap();
    let o = gesturekit(&["parse", "--text", "t.txt", "--timings", "t.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("brave"));
}

#[test]
fn llm_parse_replays_from_cache_without_network() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    copy_dir(&fixtures().join("llm_cache"), &cache);
    let o = gesturekit(
        &["parse", "--llm", "--cache", "cache", "--text", &fx("talk.txt"), "--timings", &fx("talk.timings.json")],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let script: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // the cached reply picks a different keyword than the lexicon
    assert_eq!(script["sentences"][0]["keyword"], "everyone");
    assert!(String::from_utf8_lossy(&o.stderr).contains("llm"));
}

#[test]
fn strict_llm_without_key_is_a_transport_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(
        &["parse", "--llm", "--strict", "--text", &fx("talk.txt"), "--timings", &fx("talk.timings.json")],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn llm_without_key_or_cache_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(&["parse", "--llm", "--text", &fx("talk.txt"), "--timings", &fx("talk.timings.json")], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fallback"));
    let golden = std::fs::read_to_string(fixtures().join("golden/script.json")).unwrap();
    assert_eq!(stdout(&o).trim_end(), golden);
}

#[test]
fn synth_rejects_zero_fps() {
    let dir = tempfile::tempdir().unwrap();
    let o = gesturekit(
        &["synth", "--script", &fx("golden/script.json"), "--dict", &fx("dictionary"), "--fps", "0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn onset_and_stroke_schedules_differ_only_in_timing() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["onset", "stroke"] {
        let out = format!("{mode}.json");
        let o = gesturekit(
            &["synth", "--script", &fx("golden/script.json"), "--dict", &fx("dictionary"), "--seed", "42", "--mode", mode, "--out", &out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let load = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
    };
    let (a, b) = (load("onset.schedule.json"), load("stroke.schedule.json"));
    let ids = |s: &serde_json::Value| -> Vec<(u64, String)> {
        s["entries"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e["sentence_index"].as_u64().unwrap(), e["unit_id"].as_str().unwrap().to_string()))
            .collect()
    };
    assert_eq!(ids(&a), ids(&b));
    let onsets = |s: &serde_json::Value| -> Vec<f64> {
        s["entries"].as_array().unwrap().iter().map(|e| e["onset_s"].as_f64().unwrap()).collect()
    };
    assert_ne!(onsets(&a), onsets(&b));
    assert!(std::fs::read_to_string(dir.path().join("stroke.report.txt")).unwrap().contains("apex_error max"));
}

#[test]
fn synth_with_file_base_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let base = fx("dictionary/units/welcome_9_0.json");
    let o = gesturekit(
        &[
            "synth", "--script", &fx("three.script.json"), "--dict", &fx("dictionary"), "--base", &format!("file:{base}"),
            "--csv", "--out", "m.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(csv.starts_with("frame,joint,x,y,z\n"));
    let o = gesturekit(
        &[
            "synth", "--script", &fx("three.script.json"), "--dict", &fx("dictionary"), "--base", &format!("file:{base}"),
            "--strict-base",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = gesturekit(
        &["synth", "--script", &fx("three.script.json"), "--dict", &fx("dictionary"), "--base", "wobble"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

fn copy_dir(from: &Path, to: &Path) {
    let _ = std::fs::remove_dir_all(to);
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}
