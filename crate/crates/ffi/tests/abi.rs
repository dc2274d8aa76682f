use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gesturekit_ffi::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn read(name: &str) -> CString {
    CString::new(std::fs::read_to_string(fixtures().join(name)).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = gk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    gk_string_free(p);
    s
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(gk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn clip_handles_and_loss() {
    unsafe {
        let json = read("dictionary/units/emphasis_3_0.json");
        let mut clip = ptr::null_mut();
        assert_eq!(gk_clip_load_json(json.as_ptr(), &mut clip), GkStatus::Ok);
        assert_eq!(gk_clip_frame_count(clip), 76);
        assert!(gk_clip_joint_count(clip) > 0);
        assert_eq!(gk_clip_fps(clip), 25.0);
        let mut report = GkLossReport::default();
        assert_eq!(gk_eval_loss(clip, clip, &mut report), GkStatus::Ok);
        assert_eq!(report, GkLossReport::default());

        let other = read("dictionary/units/emphasis_6_0.json");
        let mut longer = ptr::null_mut();
        assert_eq!(gk_clip_load_json(other.as_ptr(), &mut longer), GkStatus::Ok);
        assert_eq!(gk_eval_loss(clip, longer, &mut report), GkStatus::Validation);
        assert!(!last_error().is_empty());
        gk_clip_free(clip);
        gk_clip_free(longer);
    }
}

#[test]
fn null_and_bad_input_report_status() {
    unsafe {
        let mut clip = ptr::null_mut();
        assert_eq!(gk_clip_load_json(ptr::null(), &mut clip), GkStatus::NullPointer);
        assert!(last_error().contains("json"));
        assert!(clip.is_null());
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(gk_clip_load_json(bad.as_ptr().cast(), &mut clip), GkStatus::InvalidUtf8);
        let junk = CString::new("{\"fps\":").unwrap();
        assert_eq!(gk_clip_load_json(junk.as_ptr(), &mut clip), GkStatus::Validation);
        assert_eq!(gk_clip_frame_count(ptr::null()), 0);
        gk_clip_free(ptr::null_mut());
        gk_string_free(ptr::null_mut());
        gk_dictionary_free(ptr::null_mut());

        let mut dict = ptr::null_mut();
        let missing = CString::new("/nonexistent/dictionary").unwrap();
        assert_eq!(gk_dictionary_load(missing.as_ptr(), &mut dict), GkStatus::Io);
    }
}

#[test]
fn parse_and_synthesize_match_golden_files() {
    unsafe {
        let text = read("talk.txt");
        let timings = read("talk.timings.json");
        let mut script = ptr::null_mut();
        assert_eq!(gk_parse_offline(text.as_ptr(), timings.as_ptr(), &mut script), GkStatus::Ok, "{}", last_error());
        let script = take(script);
        assert_eq!(script, std::fs::read_to_string(fixtures().join("golden/script.json")).unwrap());

        let path = CString::new(fixtures().join("dictionary").to_string_lossy().into_owned()).unwrap();
        let mut dict = ptr::null_mut();
        assert_eq!(gk_dictionary_load(path.as_ptr(), &mut dict), GkStatus::Ok, "{}", last_error());
        assert_eq!(gk_dictionary_unit_count(dict), 42);

        let script = CString::new(script).unwrap();
        let options = CString::new(r#"{"seed":42,"mode":"stroke_aligned"}"#).unwrap();
        let (mut motion, mut schedule, mut report) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        let status = gk_synthesize(dict, script.as_ptr(), options.as_ptr(), &mut motion, &mut schedule, &mut report);
        assert_eq!(status, GkStatus::Ok, "{}", last_error());
        assert_eq!(take(motion), std::fs::read_to_string(fixtures().join("golden/motion.json")).unwrap());
        assert_eq!(take(schedule), std::fs::read_to_string(fixtures().join("golden/motion.schedule.json")).unwrap());
        let report: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(report["seed"], 42);

        let bad = CString::new(r#"{"fps":0}"#).unwrap();
        let status = gk_synthesize(dict, script.as_ptr(), bad.as_ptr(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, GkStatus::Validation);
        assert!(last_error().contains("fps"));
        gk_dictionary_free(dict);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = target.join("libgesturekit_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "gesturekit.h"
int main(void) {
    GkClip *clip = NULL;
    const char *json = "{\"version\":1,\"fps\":10,\"joints\":[\"a\"],\"frames\":[[[0,0,0]],[[1,0,0]],[[2,0,0]]]}";
    if (gk_clip_load_json(json, &clip) != GK_STATUS_OK) return 1;
    GkLossReport r;
    if (gk_eval_loss(clip, clip, &r) != GK_STATUS_OK || r.total != 0.0) return 2;
    if (gk_clip_frame_count(clip) != 3) return 3;
    gk_clip_free(clip);
    if (gk_clip_load_json(NULL, &clip) != GK_STATUS_NULL_POINTER) return 4;
    if (strstr(gk_last_error_message(), "null") == NULL) return 5;
    printf("%s\n", gk_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
