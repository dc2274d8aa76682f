//! C ABI over the gesturekit library.
//!
//! Every fallible function returns a [`GkStatus`]. On failure the message is
//! kept per thread and can be read with [`gk_last_error_message`]. Strings
//! handed out by the library are owned by the caller and must be released
//! with [`gk_string_free`]; handles with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use serde::Deserialize;

use gesturekit::dictionary::{load_dictionary, DictionaryError, DEFAULT_REST_TOLERANCE};
use gesturekit::intent::{build_script, Classifier, IntentError, Lexicon};
use gesturekit::motion::{derivative_l1_loss, MotionError};
use gesturekit::script::{parse_timings_json, GestureScript, ScriptError};
use gesturekit::synth::{synthesize, BaseGestureSpec, SynthError, SynthesisConfig};
use gesturekit::{canonical, Dictionary, MotionClip};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Io = 4,
    Transport = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GkLossReport {
    pub position_l1: f64,
    pub velocity_l1: f64,
    pub acceleration_l1: f64,
    pub total: f64,
}

/// Opaque motion clip handle.
pub struct GkClip(MotionClip);

/// Opaque gesture dictionary handle.
pub struct GkDictionary(Dictionary);

struct Failure {
    status: GkStatus,
    message: String,
}

impl Failure {
    fn new(status: GkStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<MotionError> for Failure {
    fn from(e: MotionError) -> Self {
        Failure::new(GkStatus::Validation, e.to_string())
    }
}

impl From<ScriptError> for Failure {
    fn from(e: ScriptError) -> Self {
        Failure::new(GkStatus::Validation, e.to_string())
    }
}

impl From<DictionaryError> for Failure {
    fn from(e: DictionaryError) -> Self {
        let status = match e {
            DictionaryError::Io { .. } => GkStatus::Io,
            _ => GkStatus::Validation,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<IntentError> for Failure {
    fn from(e: IntentError) -> Self {
        let status = match e {
            IntentError::Transport(_) => GkStatus::Transport,
            IntentError::Cache { .. } => GkStatus::Io,
            _ => GkStatus::Validation,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure::new(GkStatus::Validation, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {detail}"));
            GkStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(GkStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(GkStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(GkStatus::NullPointer, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(GkStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(GkStatus::Internal, "output contains an interior NUL byte"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn gk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a motion clip from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_clip_load_json(json: *const c_char, out: *mut *mut GkClip) -> GkStatus {
    guard(|| {
        out_arg(out, "out")?;
        let clip = MotionClip::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(GkClip(clip)));
        Ok(())
    })
}

/// # Safety
/// `clip` must be NULL or a handle from `gk_clip_load_json`, freed once.
#[no_mangle]
pub unsafe extern "C" fn gk_clip_free(clip: *mut GkClip) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// Frame count, or 0 for NULL.
///
/// # Safety
/// `clip` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_clip_frame_count(clip: *const GkClip) -> usize {
    clip.as_ref().map_or(0, |c| c.0.frame_count())
}

/// Joint count, or 0 for NULL.
///
/// # Safety
/// `clip` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_clip_joint_count(clip: *const GkClip) -> usize {
    clip.as_ref().map_or(0, |c| c.0.joint_count())
}

/// Frame rate, or 0 for NULL.
///
/// # Safety
/// `clip` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_clip_fps(clip: *const GkClip) -> f64 {
    clip.as_ref().map_or(0.0, |c| c.0.fps())
}

/// Derivative L1 loss between a reference and a predicted clip.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_eval_loss(
    reference: *const GkClip,
    predicted: *const GkClip,
    out: *mut GkLossReport,
) -> GkStatus {
    guard(|| {
        out_arg(out, "out")?;
        let r = derivative_l1_loss(&ref_arg(reference, "reference")?.0, &ref_arg(predicted, "predicted")?.0)?;
        *out = GkLossReport {
            position_l1: r.position_l1,
            velocity_l1: r.velocity_l1,
            acceleration_l1: r.acceleration_l1,
            total: r.total,
        };
        Ok(())
    })
}

/// Loads and validates a dictionary from its manifest path (or directory).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_dictionary_load(path: *const c_char, out: *mut *mut GkDictionary) -> GkStatus {
    guard(|| {
        out_arg(out, "out")?;
        let dict = load_dictionary(Path::new(str_arg(path, "path")?), DEFAULT_REST_TOLERANCE)?;
        *out = Box::into_raw(Box::new(GkDictionary(dict)));
        Ok(())
    })
}

/// # Safety
/// `dict` must be NULL or a handle from `gk_dictionary_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn gk_dictionary_free(dict: *mut GkDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// # Safety
/// `dict` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_dictionary_unit_count(dict: *const GkDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.0.len())
}

/// Builds a gesture script with the built-in lexicon. `timings_json` is a
/// word timing file (`{"words":[...]}`). Writes canonical script JSON.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_script` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_parse_offline(
    text: *const c_char,
    timings_json: *const c_char,
    out_script: *mut *mut c_char,
) -> GkStatus {
    guard(|| {
        out_arg(out_script, "out_script")?;
        let text = str_arg(text, "text")?;
        let timings = parse_timings_json(str_arg(timings_json, "timings_json")?)?;
        let (script, _) = build_script(text, &timings, &Classifier::offline(Lexicon::builtin()))?;
        *out_script = into_c_string(canonical::to_string(&script))?;
        Ok(())
    })
}

#[derive(Deserialize, Default)]
struct SynthOptions {
    #[serde(flatten)]
    config: SynthesisConfig,
    base: Option<BaseGestureSpec>,
}

/// Synthesizes motion for a script. `options_json` may be NULL or an object
/// with `fps`, `ramp_s`, `mode`, `seed`, `min_gesture_s`, `apex_anchor` and
/// `base`. Each non-NULL output receives canonical JSON.
///
/// # Safety
/// `dict` must be live, strings NUL-terminated, outputs NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gk_synthesize(
    dict: *const GkDictionary,
    script_json: *const c_char,
    options_json: *const c_char,
    out_motion: *mut *mut c_char,
    out_schedule: *mut *mut c_char,
    out_report: *mut *mut c_char,
) -> GkStatus {
    guard(|| {
        let dict = ref_arg(dict, "dict")?;
        let script = GestureScript::from_json(str_arg(script_json, "script_json")?)?;
        let options: SynthOptions = if options_json.is_null() {
            SynthOptions::default()
        } else {
            serde_json::from_str(str_arg(options_json, "options_json")?)
                .map_err(|e| Failure::new(GkStatus::Validation, format!("invalid options: {e}")))?
        };
        let base = options.base.unwrap_or(BaseGestureSpec::RestPose);
        let out = synthesize(&script, &dict.0, &base, &options.config)?;
        let motion = into_c_string(out.motion.to_json())?;
        let schedule = into_c_string(out.schedule.to_json())?;
        let report = into_c_string(canonical::to_string(&out.report))?;
        for (slot, value) in [(out_motion, motion), (out_schedule, schedule), (out_report, report)] {
            if slot.is_null() {
                gk_string_free(value);
            } else {
                *slot = value;
            }
        }
        Ok(())
    })
}
