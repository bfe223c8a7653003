use std::ffi::{CStr, CString};
use std::ptr;

use rovist_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = rovist_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { rovist_string_free(p) };
    s
}

#[test]
fn pure_functions() {
    assert_eq!(rovist_scale_score(0.0), 0.0);
    let v = unsafe { CStr::from_ptr(rovist_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));

    let mut j = 0.0;
    let s = unsafe { rovist_jaccard(c("the dog ran").as_ptr(), c("The dog sat!").as_ptr(), &mut j) };
    assert_eq!(s, RovistStatus::Ok);
    assert_eq!(j, 0.5);
}

#[test]
fn redundancy_breakdown() {
    let sentences = [c("the dog ran"), c("the dog ran")];
    let ptrs: Vec<_> = sentences.iter().map(|s| s.as_ptr()).collect();
    let mut out = RovistRedundancy::default();
    let s = unsafe { rovist_nr_score(ptrs.as_ptr(), 2, 4, &mut out) };
    assert_eq!(s, RovistStatus::Ok);
    assert_eq!((out.inter, out.intra, out.final_score), (1.0, 0.0, 0.5));

    let s = unsafe { rovist_nr_score(ptrs.as_ptr(), 2, 0, &mut out) };
    assert_eq!(s, RovistStatus::InvalidArgument);
}

#[test]
fn correlation_and_errors() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 4.0, 5.0, 9.0];
    let mut out = RovistCorrelation::default();
    let s = unsafe { rovist_correlate(x.as_ptr(), y.as_ptr(), 4, &mut out) };
    assert_eq!(s, RovistStatus::Ok);
    assert_eq!(out.sample_size, 4);
    assert!((out.spearman_rho - 1.0).abs() < 1e-12);

    let flat = [1.0; 4];
    let s = unsafe { rovist_correlate(x.as_ptr(), flat.as_ptr(), 4, &mut out) };
    assert_eq!(s, RovistStatus::Undefined);
    assert!(!last_error().is_empty());

    let s = unsafe { rovist_correlate(ptr::null(), y.as_ptr(), 4, &mut out) };
    assert_eq!(s, RovistStatus::NullArgument);
    assert!(last_error().contains("null"));
}

#[test]
fn idf_handle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idf.json");
    std::fs::write(&path, r#"{"N":4,"df":{"dog":1}}"#).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { rovist_idf_load(c(path.to_str().unwrap()).as_ptr(), &mut h) };
    assert_eq!(s, RovistStatus::Ok);
    let mut v = 0.0;
    unsafe { rovist_idf_lookup(h, c("dog").as_ptr(), &mut v) };
    assert_eq!(v, 2f64.ln());
    unsafe { rovist_idf_free(h) };

    let s = unsafe { rovist_idf_load(c("/nonexistent/idf.json").as_ptr(), &mut h) };
    assert_eq!(s, RovistStatus::Io);
}

#[test]
fn scorer_handle() {
    let mut h = ptr::null_mut();
    let s = unsafe { rovist_scorer_open(ptr::null(), ptr::null(), ptr::null(), ptr::null(), 4, &mut h) };
    assert_eq!(s, RovistStatus::Ok);
    let story = c(r#"{"story_id":"s","sentences":["a dog ran","a dog ran"],"image_ids":[]}"#);
    let mut report = ptr::null_mut();
    let s = unsafe { rovist_scorer_score_json(h, story.as_ptr(), &mut report) };
    assert_eq!(s, RovistStatus::Ok);
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    unsafe { rovist_string_free(report) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["nr"], 0.5);
    assert!(v["vg_scaled"].is_null());

    let s = unsafe { rovist_scorer_score_json(h, c("{").as_ptr(), &mut report) };
    assert_eq!(s, RovistStatus::Schema);
    unsafe { rovist_scorer_free(h) };

    let s = unsafe { rovist_scorer_open(c("vg.bin").as_ptr(), ptr::null(), ptr::null(), ptr::null(), 4, &mut h) };
    assert_eq!(s, RovistStatus::Config);
}
