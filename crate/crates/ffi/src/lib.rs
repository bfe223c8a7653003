//! C ABI over the `rovist` library.
//!
//! Every function returns a [`RovistStatus`] (or a plain value when it cannot
//! fail). On failure the message is kept per thread and can be fetched with
//! [`rovist_last_error_message`]. Strings handed out by this library must be
//! released with [`rovist_string_free`]; handles with their own `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rovist::backend::{HashedVision, HashedWordVectors};
use rovist::coherence::CoherenceModel;
use rovist::corpus::{load_regions, RegionIndex, Story};
use rovist::harness::{correlate, score_story, ScoreOptions, Scorers};
use rovist::nr::{jaccard, nr_score};
use rovist::text::{word_tokens, IdfTable, LexiconTagger};
use rovist::vg::{scale_score, VgEncoderParams, VgOptions, VgScorer};
use rovist::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RovistStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Schema = 5,
    Config = 6,
    Backend = 7,
    MissingRegions = 8,
    Undefined = 9,
    Artifact = 10,
    Panic = 99,
}

impl From<&Error> for RovistStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => RovistStatus::Io,
            Error::Schema { .. } => RovistStatus::Schema,
            Error::Config(_) => RovistStatus::Config,
            Error::Backend(_) | Error::OutOfVocabulary(_) => RovistStatus::Backend,
            Error::MissingRegions(_) => RovistStatus::MissingRegions,
            Error::UndefinedCorrelation(_) => RovistStatus::Undefined,
            Error::Artifact { .. } => RovistStatus::Artifact,
            _ => RovistStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(RovistStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(RovistStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Fail>;

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> RovistStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RovistStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RovistStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RovistStatus::NullArgument, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Fail(RovistStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    opt_str(p, what)?.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(RovistStatus::InvalidArgument, "string contains NUL".into()))
}

/// Message of the last failed call on this thread, or null. Free it with
/// `rovist_string_free`.
#[no_mangle]
pub extern "C" fn rovist_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rovist_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn rovist_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Maps a raw grounding score into (−1, 1).
#[no_mangle]
pub extern "C" fn rovist_scale_score(raw: f64) -> f64 {
    scale_score(raw)
}

/// Jaccard similarity of the word sets of two sentences.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rovist_jaccard(a: *const c_char, b: *const c_char, out: *mut f64) -> RovistStatus {
    guard(|| {
        let (a, b) = (req_str(a, "a")?, req_str(b, "b")?);
        write_out(out, jaccard(&word_tokens(a), &word_tokens(b)))
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RovistRedundancy {
    pub inter: f64,
    pub intra: f64,
    pub final_score: f64,
}

/// Non-redundancy of a story given as `count` sentences.
///
/// # Safety
/// `sentences` must point to `count` NUL-terminated strings; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rovist_nr_score(
    sentences: *const *const c_char,
    count: usize,
    ngram: usize,
    out: *mut RovistRedundancy,
) -> RovistStatus {
    guard(|| {
        if sentences.is_null() {
            return Err(null("sentences"));
        }
        if count == 0 || ngram == 0 {
            return Err(Fail(RovistStatus::InvalidArgument, "count and ngram must be positive".into()));
        }
        let list = std::slice::from_raw_parts(sentences, count)
            .iter()
            .map(|&p| req_str(p, "sentence").map(str::to_owned))
            .collect::<FfiResult<Vec<_>>>()?;
        let b = nr_score(&Story::new("ffi", list), ngram);
        write_out(
            out,
            RovistRedundancy {
                inter: b.inter,
                intra: b.intra,
                final_score: b.final_score,
            },
        )
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RovistCorrelation {
    pub spearman_rho: f64,
    pub pearson_r: f64,
    pub kendall_tau: f64,
    pub sample_size: usize,
}

/// Spearman, Pearson and Kendall tau-b between two samples of length `n`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rovist_correlate(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut RovistCorrelation,
) -> RovistStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("sample"));
        }
        let r = correlate(std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n))?;
        write_out(
            out,
            RovistCorrelation {
                spearman_rho: r.spearman_rho,
                pearson_r: r.pearson_r,
                kendall_tau: r.kendall_tau,
                sample_size: r.sample_size,
            },
        )
    })
}

/// Opaque idf table.
pub struct RovistIdf {
    table: IdfTable,
}

/// Loads an idf table written by `rovist build-idf`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rovist_idf_load(path: *const c_char, out: *mut *mut RovistIdf) -> RovistStatus {
    guard(|| {
        let table = IdfTable::load(req_str(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(RovistIdf { table })))
    })
}

/// idf of a word or phrase (mean over its tokens).
///
/// # Safety
/// `idf` must be a live handle, `phrase` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rovist_idf_lookup(
    idf: *const RovistIdf,
    phrase: *const c_char,
    out: *mut f64,
) -> RovistStatus {
    guard(|| {
        let idf = idf.as_ref().ok_or_else(|| null("idf"))?;
        write_out(out, idf.table.phrase_idf(req_str(phrase, "phrase")?))
    })
}

/// # Safety
/// `idf` must be null or a handle from `rovist_idf_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rovist_idf_free(idf: *mut RovistIdf) {
    if !idf.is_null() {
        drop(Box::from_raw(idf));
    }
}

/// Opaque scorer: the configured components plus the region index.
pub struct RovistScorer {
    scorers: Scorers,
    regions: RegionIndex,
    idf: Option<IdfTable>,
}

/// Builds a scorer from artifact paths; any path may be null to leave that
/// component out. Grounding needs both `vg_params` and `regions`; it weights
/// nouns by idf only when `idf_table` is given. `ngram` of 0 disables the
/// non-redundancy component. Stub word and vision backends are used.
///
/// # Safety
/// Non-null paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rovist_scorer_open(
    vg_params: *const c_char,
    coherence_model: *const c_char,
    regions: *const c_char,
    idf_table: *const c_char,
    ngram: usize,
    out: *mut *mut RovistScorer,
) -> RovistStatus {
    guard(|| {
        let vg_path = opt_str(vg_params, "vg_params")?.map(PathBuf::from);
        let regions_path = opt_str(regions, "regions")?.map(PathBuf::from);
        let idf = opt_str(idf_table, "idf_table")?.map(IdfTable::load).transpose()?;
        let vg = match (&vg_path, &regions_path) {
            (Some(p), Some(_)) => {
                let params = VgEncoderParams::load(p)?;
                Some(VgScorer {
                    words: Box::new(HashedWordVectors::new(params.text_in())),
                    vision: Box::new(HashedVision::new(params.image_in())),
                    tagger: Box::new(LexiconTagger::english()),
                    options: VgOptions {
                        use_idf: idf.is_some(),
                        ..Default::default()
                    },
                    params,
                })
            }
            (None, None) => None,
            _ => {
                return Err(Fail(
                    RovistStatus::Config,
                    "grounding needs both vg_params and regions".into(),
                ))
            }
        };
        let regions = regions_path.map(load_regions).transpose()?.unwrap_or_default();
        let coherence = opt_str(coherence_model, "coherence_model")?
            .map(CoherenceModel::load)
            .transpose()?;
        let scorer = RovistScorer {
            scorers: Scorers {
                vg,
                coherence,
                nr_ngram: (ngram > 0).then_some(ngram),
            },
            regions,
            idf,
        };
        write_out(out, Box::into_raw(Box::new(scorer)))
    })
}

/// Scores one story given as a JSON object and returns the report as JSON.
/// Free the report with `rovist_string_free`.
///
/// # Safety
/// `scorer` must be a live handle, `story_json` a NUL-terminated string and
/// `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn rovist_scorer_score_json(
    scorer: *const RovistScorer,
    story_json: *const c_char,
    report_json: *mut *mut c_char,
) -> RovistStatus {
    guard(|| {
        let s = scorer.as_ref().ok_or_else(|| null("scorer"))?;
        let story: Story = serde_json::from_str(req_str(story_json, "story_json")?)
            .map_err(|e| Fail(RovistStatus::Schema, format!("story: {e}")))?;
        let report = score_story(&story, &s.regions, &s.scorers, s.idf.as_ref(), &ScoreOptions::default())?;
        let text = serde_json::to_string(&report).map_err(|e| Fail(RovistStatus::InvalidArgument, e.to_string()))?;
        write_out(report_json, into_c_string(text)?)
    })
}

/// # Safety
/// `scorer` must be null or a handle from `rovist_scorer_open` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rovist_scorer_free(scorer: *mut RovistScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}
