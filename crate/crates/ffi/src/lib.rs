//! C ABI over the memory engine.
//!
//! Every call returns a [`DcmStatus`]. Results come back as JSON strings
//! through `out_json`; free them with [`dcm_string_free`]. On failure the
//! message is available from [`dcm_last_error`] on the same thread until the
//! next failing call.
//!
//! An engine handle is not thread safe; serialize calls on one handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use dcm_core::{ContributionId, DcmError, DialogueClient, Engine, EngineConfig};
use serde_json::json;

/// Opaque engine handle.
pub struct DcmEngine {
    engine: Engine,
    client: Arc<dyn DialogueClient>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    UnknownPlace = 5,
    DialogueFailed = 6,
    Config = 7,
    Io = 8,
    Internal = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DcmStatus, String);

impl From<DcmError> for Failure {
    fn from(e: DcmError) -> Self {
        let status = match &e {
            DcmError::RejectedInput(_)
            | DcmError::UnknownSession(_)
            | DcmError::InvalidArgument(_)
            | DcmError::StaleFragment(_)
            | DcmError::Corpus { .. } => DcmStatus::InvalidArgument,
            DcmError::NotFound(_) => DcmStatus::NotFound,
            DcmError::UnknownPlace(_) => DcmStatus::UnknownPlace,
            DcmError::Dialogue { .. } => DcmStatus::DialogueFailed,
            DcmError::Config(_) => DcmStatus::Config,
            DcmError::Io(_) => DcmStatus::Io,
            DcmError::Json(_) => DcmStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(DcmStatus::Internal, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DcmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic inside dcm");
            DcmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(DcmStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DcmStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn engine_arg<'a>(p: *mut DcmEngine) -> Result<&'a mut DcmEngine, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(DcmStatus::NullPointer, "engine is null".into()))
}

unsafe fn write_json(out: *mut *mut c_char, value: serde_json::Value) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(DcmStatus::NullPointer, "out_json is null".into()));
    }
    let text = serde_json::to_string(&value)?;
    let c = CString::new(text).map_err(|e| Failure(DcmStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Creates an engine from a TOML config, or defaults when `config_toml` is
/// null.
///
/// # Safety
/// `config_toml` is null or a NUL-terminated string; `out_engine` is valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn dcm_engine_new(
    config_toml: *const c_char,
    out_engine: *mut *mut DcmEngine,
) -> DcmStatus {
    guard(|| {
        if out_engine.is_null() {
            return Err(Failure(DcmStatus::NullPointer, "out_engine is null".into()));
        }
        let config = if config_toml.is_null() {
            EngineConfig::default()
        } else {
            EngineConfig::from_toml(str_arg(config_toml, "config_toml")?)?
        };
        let client = config.dialogue.build()?;
        let engine = Engine::new(&config)?;
        *out_engine = Box::into_raw(Box::new(DcmEngine { engine, client }));
        Ok(())
    })
}

/// # Safety
/// `engine` is null or a handle from [`dcm_engine_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcm_engine_free(engine: *mut DcmEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Ingests an utterance on the current day. Pass NaN as `emotion` to score
/// it from the text.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcm_ingest(
    engine: *mut DcmEngine,
    session_id: *const c_char,
    text: *const c_char,
    emotion: f64,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        let session = str_arg(session_id, "session_id")?;
        let text = str_arg(text, "text")?;
        let emotion = (!emotion.is_nan()).then_some(emotion);
        let day = h.engine.clock();
        let out = h.engine.ingest_fragment(text, session, emotion, &[], day)?;
        write_json(out_json, serde_json::to_value(out)?)
    })
}

/// Ingests a photo caption taken at a gazetteer place.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcm_ingest_caption(
    engine: *mut DcmEngine,
    session_id: *const c_char,
    caption: *const c_char,
    location: *const c_char,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        let session = str_arg(session_id, "session_id")?;
        let caption = str_arg(caption, "caption")?;
        let location = str_arg(location, "location")?;
        let out = h.engine.ingest_photo_caption(caption, location, session, false)?;
        write_json(out_json, serde_json::to_value(out)?)
    })
}

/// Advances simulated time by `days`, returning the lifecycle report.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn dcm_tick(
    engine: *mut DcmEngine,
    days: u32,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        let report = h.engine.tick(days, h.client.as_ref())?;
        write_json(out_json, serde_json::to_value(report)?)
    })
}

/// Builds a context bundle for `query`; `k == 0` uses the configured size.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcm_build_context(
    engine: *mut DcmEngine,
    query: *const c_char,
    k: usize,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        let query = str_arg(query, "query")?;
        let k = if k == 0 { h.engine.context_k() } else { k };
        let bundle = h.engine.build_context(query, k)?;
        write_json(out_json, serde_json::to_value(bundle)?)
    })
}

/// Builds a bundle for `query` and asks the dialogue client for a reply:
/// `{"response_text": ..., "bundle": ...}`.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcm_respond(
    engine: *mut DcmEngine,
    query: *const c_char,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        let query = str_arg(query, "query")?;
        let bundle = h.engine.build_context(query, h.engine.context_k())?;
        let text = h.engine.respond(&bundle, query, h.client.as_ref())?;
        write_json(out_json, json!({ "response_text": text, "bundle": bundle }))
    })
}

/// Deletes one contribution, returning the deletion receipt.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dcm_delete_contribution(
    engine: *mut DcmEngine,
    contribution_id: *const c_char,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        let id = ContributionId::from(str_arg(contribution_id, "contribution_id")?);
        let receipt = h.engine.delete_contribution(&id)?;
        write_json(out_json, serde_json::to_value(receipt)?)
    })
}

/// The avatar expression state for the current graph.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn dcm_expression(
    engine: *mut DcmEngine,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        write_json(out_json, serde_json::to_value(h.engine.expression())?)
    })
}

/// `{"hash": <sha256 hex>, "graph": <canonical graph JSON>}`.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn dcm_snapshot(
    engine: *mut DcmEngine,
    out_json: *mut *mut c_char,
) -> DcmStatus {
    guard(|| {
        let h = engine_arg(engine)?;
        let snap = h.engine.snapshot()?;
        let graph: serde_json::Value = serde_json::from_slice(&snap.bytes)?;
        write_json(out_json, json!({ "hash": snap.hash, "graph": graph }))
    })
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library; do not free.
#[no_mangle]
pub extern "C" fn dcm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned through `out_json`.
///
/// # Safety
/// `s` is null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
