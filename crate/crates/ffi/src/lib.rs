//! C ABI for the emoedit HED pipeline.
//!
//! Conventions:
//! * every fallible function returns an [`EmoeditStatus`]; results go through
//!   out-pointers, which are only written on success;
//! * handles are opaque and owned by the caller, released with the matching
//!   `*_free` function (passing NULL is a no-op);
//! * strings returned by the library are NUL-terminated UTF-8 and released with
//!   [`emoedit_string_free`];
//! * after a failure, [`emoedit_last_error_message`] and
//!   [`emoedit_last_error_code`] describe it (per thread, until the next call).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use emoedit::audio::decode_wav;
use emoedit::corpus::parse_alignment_text;
use emoedit::editor::{apply, EditScript};
use emoedit::features::Analyzer;
use emoedit::hed::{extract_hed, parse_hed, serialize_hed, HedFormat, HedMatrix, ModelBank};
use emoedit::ranker::Level;
use emoedit::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmoeditStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An integer argument was out of range (format, level, index).
    InvalidArgument = 3,
    Audio = 4,
    Alignment = 5,
    Features = 6,
    Ranker = 7,
    Hed = 8,
    Editor = 9,
    Io = 10,
    /// Any other library error.
    Other = 11,
    /// A Rust panic was caught at the boundary; this is a bug.
    Panic = 12,
}

pub const EMOEDIT_FORMAT_CSV: u32 = 0;
pub const EMOEDIT_FORMAT_JSON: u32 = 1;

pub const EMOEDIT_LEVEL_UTTERANCE: u32 = 0;
pub const EMOEDIT_LEVEL_WORD: u32 = 1;
pub const EMOEDIT_LEVEL_PHONEME: u32 = 2;

/// A loaded model bank (one ranker per emotion and level).
pub struct EmoeditBank {
    bank: ModelBank,
    analyzer: Analyzer,
}

/// A HED matrix: one row per phoneme, `3 * K` intensities per row.
pub struct EmoeditHed {
    hed: HedMatrix,
}

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_error(code: &str, message: &str) {
    let clean = |s: &str| CString::new(s.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(LastError { code: clean(code), message: clean(message) }));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> EmoeditStatus {
    match e.module() {
        "audio" => EmoeditStatus::Audio,
        "alignment" => EmoeditStatus::Alignment,
        "features" => EmoeditStatus::Features,
        "ranker" => EmoeditStatus::Ranker,
        "hed" => EmoeditStatus::Hed,
        "editor" => EmoeditStatus::Editor,
        "io" => EmoeditStatus::Io,
        _ => EmoeditStatus::Other,
    }
}

struct Fail(EmoeditStatus);

impl<E: Into<Error>> From<E> for Fail {
    fn from(e: E) -> Self {
        let e = e.into();
        set_error(e.code(), &e.to_string());
        Fail(status_of(&e))
    }
}

fn fail(status: EmoeditStatus, code: &str, message: &str) -> Fail {
    set_error(code, message);
    Fail(status)
}

/// Runs `f` with panics contained and the error slot maintained.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EmoeditStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmoeditStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(_) => {
            set_error("ffi.panic", "internal panic");
            EmoeditStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(EmoeditStatus::NullPointer, "ffi.null_pointer", &format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EmoeditStatus::InvalidUtf8, "ffi.invalid_utf8", &format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(EmoeditStatus::NullPointer, "ffi.null_pointer", &format!("{name} is NULL")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(fail(EmoeditStatus::NullPointer, "ffi.null_pointer", &format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

fn format_arg(f: u32) -> Result<HedFormat, Fail> {
    match f {
        EMOEDIT_FORMAT_CSV => Ok(HedFormat::Csv),
        EMOEDIT_FORMAT_JSON => Ok(HedFormat::Json),
        _ => Err(fail(EmoeditStatus::InvalidArgument, "ffi.invalid_argument", &format!("unknown format {f}"))),
    }
}

fn level_arg(l: u32) -> Result<Level, Fail> {
    Level::ALL
        .get(l as usize)
        .copied()
        .ok_or_else(|| fail(EmoeditStatus::InvalidArgument, "ffi.invalid_argument", &format!("unknown level {l}")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn emoedit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// library call on the same thread.
#[no_mangle]
pub extern "C" fn emoedit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Dotted error code of the last failure (e.g. `hed.validation`), or NULL.
#[no_mangle]
pub extern "C" fn emoedit_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Loads a model bank directory written by `emoedit train`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoedit_bank_load(dir: *const c_char, out: *mut *mut EmoeditBank) -> EmoeditStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        out_arg(out, "out")?;
        let bank = ModelBank::load_dir(Path::new(dir))?;
        *out = Box::into_raw(Box::new(EmoeditBank { bank, analyzer: Analyzer::default() }));
        Ok(())
    })
}

/// # Safety
/// `bank` must be NULL or a handle from [`emoedit_bank_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emoedit_bank_free(bank: *mut EmoeditBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Number of emotions in the bank (0 for NULL).
///
/// # Safety
/// `bank` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emoedit_bank_emotion_count(bank: *const EmoeditBank) -> usize {
    bank.as_ref().map_or(0, |b| b.bank.emotions().len())
}

/// Extracts a HED matrix from WAV bytes and an alignment (JSON or TextGrid text).
///
/// # Safety
/// `wav` must point to `wav_len` readable bytes; `alignment` must be a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoedit_extract(
    bank: *const EmoeditBank,
    wav: *const u8,
    wav_len: usize,
    alignment: *const c_char,
    out: *mut *mut EmoeditHed,
) -> EmoeditStatus {
    guard(|| {
        let bank = ref_arg(bank, "bank")?;
        let wav = ref_arg(wav, "wav")?;
        let alignment = str_arg(alignment, "alignment")?;
        out_arg(out, "out")?;
        let bytes = std::slice::from_raw_parts(wav, wav_len);
        let w = decode_wav(bytes)?;
        let h = parse_alignment_text(alignment)?;
        let hed = extract_hed(&w, &h, &bank.bank, &bank.analyzer)?;
        *out = Box::into_raw(Box::new(EmoeditHed { hed }));
        Ok(())
    })
}

/// Parses a HED document in the given format (`EMOEDIT_FORMAT_*`).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoedit_hed_parse(text: *const c_char, format: u32, out: *mut *mut EmoeditHed) -> EmoeditStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let format = format_arg(format)?;
        out_arg(out, "out")?;
        let hed = parse_hed(text, format)?;
        *out = Box::into_raw(Box::new(EmoeditHed { hed }));
        Ok(())
    })
}

/// # Safety
/// `hed` must be NULL or a live HED handle.
#[no_mangle]
pub unsafe extern "C" fn emoedit_hed_free(hed: *mut EmoeditHed) {
    if !hed.is_null() {
        drop(Box::from_raw(hed));
    }
}

/// Number of rows (phonemes); 0 for NULL.
///
/// # Safety
/// `hed` must be NULL or a live HED handle.
#[no_mangle]
pub unsafe extern "C" fn emoedit_hed_rows(hed: *const EmoeditHed) -> usize {
    hed.as_ref().map_or(0, |h| h.hed.row_count())
}

/// Number of emotions K; 0 for NULL.
///
/// # Safety
/// `hed` must be NULL or a live HED handle.
#[no_mangle]
pub unsafe extern "C" fn emoedit_hed_emotion_count(hed: *const EmoeditHed) -> usize {
    hed.as_ref().map_or(0, |h| h.hed.k())
}

/// Reads one intensity.
///
/// # Safety
/// `hed` must be a live HED handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoedit_hed_value(
    hed: *const EmoeditHed,
    row: usize,
    level: u32,
    emotion: usize,
    out: *mut f64,
) -> EmoeditStatus {
    guard(|| {
        let h = &ref_arg(hed, "hed")?.hed;
        let level = level_arg(level)?;
        out_arg(out, "out")?;
        if row >= h.row_count() || emotion >= h.k() {
            return Err(fail(
                EmoeditStatus::InvalidArgument,
                "ffi.invalid_argument",
                &format!("cell ({row}, {emotion}) outside {}x{}", h.row_count(), h.k()),
            ));
        }
        *out = h.value(row, level, emotion);
        Ok(())
    })
}

/// Applies an edit script (JSON) and returns a new handle; `hed` is unchanged.
///
/// # Safety
/// `hed` must be a live HED handle; `script_json` a NUL-terminated string;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoedit_hed_apply(
    hed: *const EmoeditHed,
    script_json: *const c_char,
    out: *mut *mut EmoeditHed,
) -> EmoeditStatus {
    guard(|| {
        let h = ref_arg(hed, "hed")?;
        let script = str_arg(script_json, "script_json")?;
        out_arg(out, "out")?;
        let script = EditScript::from_json(script)?;
        let edited = apply(&h.hed, &script)?;
        *out = Box::into_raw(Box::new(EmoeditHed { hed: edited }));
        Ok(())
    })
}

/// Serializes a HED matrix; free the result with [`emoedit_string_free`].
///
/// # Safety
/// `hed` must be a live HED handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoedit_hed_export(hed: *const EmoeditHed, format: u32, out: *mut *mut c_char) -> EmoeditStatus {
    guard(|| {
        let h = ref_arg(hed, "hed")?;
        let format = format_arg(format)?;
        out_arg(out, "out")?;
        *out = into_c_string(serialize_hed(&h.hed, format));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emoedit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
