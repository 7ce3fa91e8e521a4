//! C ABI over `gazecue`.
//!
//! Every fallible call returns a [`GcStatus`]; on anything but `GC_STATUS_OK`
//! a message is available from [`gc_last_error`] on the same thread.
//! Strings handed out by this library are freed with [`gc_string_free`].

use std::cell::RefCell;
use std::collections::VecDeque;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gazecue::engine::{Engine, EngineConfig, Poi};
use gazecue::geometry::{align_frames, ray_aabb_intersect, rms_residual, Aabb, Ray, Vec3};
use gazecue::protocol::{Delivery, FileLog, Hub, HubConfig, LogSink, NullLog};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    /// Correspondences do not determine a rotation.
    Degenerate = 3,
    /// The ray misses the box.
    NoHit = 4,
    Config = 5,
    /// Nothing queued.
    Empty = 6,
    Io = 7,
    Internal = 8,
}

/// Opaque session: an engine behind the session layer, fed by the caller.
pub struct GcSession {
    hub: Hub,
    outbox: VecDeque<Delivery>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: GcStatus, msg: impl Into<String>) -> GcStatus {
    set_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> GcStatus) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(GcStatus::Internal, "internal panic"),
    }
}

unsafe fn read3(p: *const f64) -> Option<Vec3> {
    if p.is_null() {
        return None;
    }
    let s = std::slice::from_raw_parts(p, 3);
    Some(Vec3::new(s[0], s[1], s[2]))
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, GcStatus> {
    if p.is_null() {
        return Err(fail(GcStatus::NullArgument, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GcStatus::InvalidArgument, "string is not UTF-8"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Returns a copy of the calling thread's last error message, or NULL if
/// none was recorded. Free with `gc_string_free`.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |s| s.clone().into_raw())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Entry distance of a ray into an axis-aligned box. Writes `t` (0 when the
/// origin is inside) and returns `GC_STATUS_OK`, or returns
/// `GC_STATUS_NO_HIT`.
///
/// # Safety
/// All pointers must reference 3 readable doubles; `t_out` one writable double.
#[no_mangle]
pub unsafe extern "C" fn gc_ray_aabb(
    origin: *const f64,
    dir: *const f64,
    center: *const f64,
    half: *const f64,
    t_out: *mut f64,
) -> GcStatus {
    guarded(|| {
        let (Some(o), Some(d), Some(c), Some(h)) =
            (read3(origin), read3(dir), read3(center), read3(half))
        else {
            return fail(GcStatus::NullArgument, "null vector");
        };
        if t_out.is_null() {
            return fail(GcStatus::NullArgument, "null t_out");
        }
        let ray = match Ray::new(o, d) {
            Ok(r) => r,
            Err(e) => return fail(GcStatus::InvalidArgument, e.to_string()),
        };
        let aabb = match Aabb::new(c, h) {
            Ok(b) => b,
            Err(e) => return fail(GcStatus::InvalidArgument, e.to_string()),
        };
        match ray_aabb_intersect(&ray, &aabb) {
            Some(t) => {
                *t_out = t;
                GcStatus::Ok
            }
            None => GcStatus::NoHit,
        }
    })
}

/// Least-squares rigid transform mapping `from[i]` onto `to[i]`. Points are
/// packed xyz triples, `n` pairs. Writes the rotation quaternion (w, x, y, z),
/// the translation and, if `rms_out` is not NULL, the RMS residual.
///
/// # Safety
/// `from` and `to` must hold `3 * n` doubles; `quat_wxyz` 4 and
/// `translation` 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gc_align(
    from: *const f64,
    to: *const f64,
    n: usize,
    quat_wxyz: *mut f64,
    translation: *mut f64,
    rms_out: *mut f64,
) -> GcStatus {
    guarded(|| {
        if from.is_null() || to.is_null() || quat_wxyz.is_null() || translation.is_null() {
            return fail(GcStatus::NullArgument, "null buffer");
        }
        let a = std::slice::from_raw_parts(from, 3 * n);
        let b = std::slice::from_raw_parts(to, 3 * n);
        let pairs: Vec<(Vec3, Vec3)> = a
            .chunks_exact(3)
            .zip(b.chunks_exact(3))
            .map(|(p, q)| (Vec3::new(p[0], p[1], p[2]), Vec3::new(q[0], q[1], q[2])))
            .collect();
        let t = match align_frames(&pairs) {
            Ok(t) => t,
            Err(e) => return fail(GcStatus::Degenerate, e.to_string()),
        };
        let q = t.quaternion_wxyz();
        std::slice::from_raw_parts_mut(quat_wxyz, 4).copy_from_slice(&q);
        std::slice::from_raw_parts_mut(translation, 3).copy_from_slice(&t.translation().to_array());
        if !rms_out.is_null() {
            *rms_out = rms_residual(&t, &pairs);
        }
        GcStatus::Ok
    })
}

/// Creates a session. `engine_json` is an engine config object (NULL for
/// defaults). `pois_json` is an array of `{"id", "position": [x, y, z],
/// "label"}` objects (NULL for none). `log_path`, if not NULL, receives the
/// NDJSON session log. Returns NULL on failure.
///
/// # Safety
/// Non-NULL arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gc_session_new(
    engine_json: *const c_char,
    pois_json: *const c_char,
    session_id: *const c_char,
    log_path: *const c_char,
) -> *mut GcSession {
    let made = catch_unwind(AssertUnwindSafe(|| -> Result<Box<GcSession>, GcStatus> {
        let cfg = if engine_json.is_null() {
            EngineConfig::default()
        } else {
            serde_json::from_str(read_str(engine_json)?)
                .map_err(|e| fail(GcStatus::Config, e.to_string()))?
        };
        let mut engine = Engine::new(cfg).map_err(|e| fail(GcStatus::Config, e.to_string()))?;
        if !pois_json.is_null() {
            let pois: Vec<Poi> = serde_json::from_str(read_str(pois_json)?)
                .map_err(|e| fail(GcStatus::Config, e.to_string()))?;
            for p in pois {
                if p.id.is_empty() || !p.position.is_finite() {
                    return Err(fail(GcStatus::Config, format!("invalid poi {:?}", p.id)));
                }
                engine.add_poi(p);
            }
        }
        let id = if session_id.is_null() {
            "ffi".to_string()
        } else {
            read_str(session_id)?.to_string()
        };
        let log: Box<dyn LogSink> = if log_path.is_null() {
            Box::new(NullLog)
        } else {
            let path = read_str(log_path)?;
            Box::new(FileLog::create(path).map_err(|e| fail(GcStatus::Io, e.to_string()))?)
        };
        Ok(Box::new(GcSession {
            hub: Hub::new(engine, HubConfig::new(id, 0), log),
            outbox: VecDeque::new(),
        }))
    }));
    match made {
        Ok(Ok(s)) => Box::into_raw(s),
        Ok(Err(_)) => ptr::null_mut(),
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be NULL or a live session from `gc_session_new`.
#[no_mangle]
pub unsafe extern "C" fn gc_session_free(s: *mut GcSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

unsafe fn session<'a>(s: *mut GcSession) -> Result<&'a mut GcSession, GcStatus> {
    s.as_mut()
        .ok_or_else(|| fail(GcStatus::NullArgument, "null session"))
}

/// Opens a connection and writes its id to `conn_out`.
///
/// # Safety
/// `s` must be a live session, `conn_out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_session_connect(s: *mut GcSession, conn_out: *mut u64) -> GcStatus {
    guarded(|| {
        let s = match session(s) {
            Ok(s) => s,
            Err(e) => return e,
        };
        if conn_out.is_null() {
            return fail(GcStatus::NullArgument, "null conn_out");
        }
        *conn_out = s.hub.connect();
        GcStatus::Ok
    })
}

/// # Safety
/// `s` must be a live session.
#[no_mangle]
pub unsafe extern "C" fn gc_session_disconnect(s: *mut GcSession, conn: u64) -> GcStatus {
    guarded(|| match session(s) {
        Ok(s) => {
            s.hub.disconnect(conn);
            GcStatus::Ok
        }
        Err(e) => e,
    })
}

/// Feeds one inbound wire line from `conn`, received at `at_us`. Replies and
/// broadcasts are queued for `gc_session_poll`.
///
/// # Safety
/// `s` live, `line` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gc_session_line(
    s: *mut GcSession,
    conn: u64,
    at_us: i64,
    line: *const c_char,
) -> GcStatus {
    guarded(|| {
        let s = match session(s) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let line = match read_str(line) {
            Ok(l) => l,
            Err(e) => return e,
        };
        let out = s.hub.on_line(conn, at_us, line);
        s.outbox.extend(out);
        GcStatus::Ok
    })
}

/// Advances the session clock to `at_us`.
///
/// # Safety
/// `s` must be a live session.
#[no_mangle]
pub unsafe extern "C" fn gc_session_tick(s: *mut GcSession, at_us: i64) -> GcStatus {
    guarded(|| {
        let s = match session(s) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let out = s.hub.on_tick(at_us);
        s.outbox.extend(out);
        GcStatus::Ok
    })
}

/// Pops the next queued delivery. Writes the target connection and either
/// the line (free with `gc_string_free`) or NULL when the connection is to
/// be closed. Returns `GC_STATUS_EMPTY` when nothing is queued.
///
/// # Safety
/// `s` live, `conn_out` and `line_out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_session_poll(
    s: *mut GcSession,
    conn_out: *mut u64,
    line_out: *mut *mut c_char,
) -> GcStatus {
    guarded(|| {
        let s = match session(s) {
            Ok(s) => s,
            Err(e) => return e,
        };
        if conn_out.is_null() || line_out.is_null() {
            return fail(GcStatus::NullArgument, "null output pointer");
        }
        match s.outbox.pop_front() {
            None => GcStatus::Empty,
            Some(Delivery::Line { conn, line }) => {
                *conn_out = conn;
                *line_out = into_c_string(line);
                GcStatus::Ok
            }
            Some(Delivery::Close { conn }) => {
                *conn_out = conn;
                *line_out = ptr::null_mut();
                GcStatus::Ok
            }
        }
    })
}
